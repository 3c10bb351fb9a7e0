mod common;

use common::{check_golden, read_tree, Workspace};

#[test]
fn full_pipeline_matches_golden_and_is_idempotent() {
    let ws = Workspace::new();
    let first = ws.full_run();
    for (args, r) in common::FULL_RUN.iter().zip(&first) {
        assert_eq!(r.code, 0, "{args:?}: {}\n{}", r.summary, r.stderr);
        assert_eq!(r.summary["status"], "ok");
    }
    let diffs = check_golden(&ws.out());
    assert!(diffs.is_empty(), "golden mismatch (set UPDATE_GOLDEN=1 to accept):\n{}", diffs.join("\n"));

    let before = read_tree(&ws.out());
    let second = ws.full_run();
    assert!(second.iter().all(|r| r.code == 0));
    let q = &second[1].summary;
    assert_eq!((q["calls"].as_u64(), q["skipped"].as_u64()), (Some(0), Some(12)));
    assert_eq!(read_tree(&ws.out()), before);
}
