use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Append-only record of games whose output files are complete.
///
/// One game id per line. A trailing line without a newline is a torn write
/// and is dropped on open.
#[derive(Debug)]
pub struct Checkpoint {
    path: PathBuf,
    completed: BTreeSet<String>,
}

impl Checkpoint {
    pub fn open(path: impl Into<PathBuf>) -> io::Result<Self> {
        let path = path.into();
        let mut completed = BTreeSet::new();
        match fs::read_to_string(&path) {
            Ok(text) => {
                let complete_len = text.rfind('\n').map_or(0, |i| i + 1);
                if complete_len != text.len() {
                    let f = OpenOptions::new().write(true).open(&path)?;
                    f.set_len(complete_len as u64)?;
                    f.sync_all()?;
                }
                completed.extend(
                    text[..complete_len]
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(str::to_string),
                );
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
        Ok(Checkpoint { path, completed })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, game_id: &str) -> bool {
        self.completed.contains(game_id)
    }

    pub fn completed(&self) -> &BTreeSet<String> {
        &self.completed
    }

    /// Appends `game_id` and syncs. Marking twice is a no-op.
    pub fn mark(&mut self, game_id: &str) -> io::Result<()> {
        if self.completed.contains(game_id) {
            return Ok(());
        }
        if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        f.write_all(format!("{game_id}\n").as_bytes())?;
        f.sync_all()?;
        self.completed.insert(game_id.to_string());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reload_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.txt");
        let mut ck = Checkpoint::open(&p).unwrap();
        assert!(!ck.contains("1"));
        ck.mark("1").unwrap();
        ck.mark("2").unwrap();
        ck.mark("2").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "1\n2\n");

        fs::write(&p, "1\n2\n57").unwrap();
        let mut ck = Checkpoint::open(&p).unwrap();
        assert!(ck.contains("2") && !ck.contains("57"));
        ck.mark("570").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "1\n2\n570\n");
    }
}
