//! Keyword tables that turn raw store tags into canonical flags.

use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;

use super::{KeywordSource, RawGameRecord};
use crate::schema::{
    pegi_bucket, price_category_from_price, GameMetadata, Genre, PlatformFlag, Store,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Genre(Genre),
    Flag(PlatformFlag),
}

use KeywordSource::{CategoryFlag, GameMode, Genre as GenreKey, TagMapping};

const GENRE_TAG: &[KeywordSource] = &[GenreKey, TagMapping];

type Row = (Target, &'static [&'static str], &'static [KeywordSource]);

const STEAM_TABLE: &[Row] = &[
    (Target::Genre(Genre::Action), &["Action", "Action RPG", "Action Roguelike", "Action-Adventure", "Beat 'em up", "Character Action Game", "Combat", "FPS", "Fighting", "Hack and Slash", "Shooter", "Swordplay", "Twin Stick Shooter"], GENRE_TAG),
    (Target::Genre(Genre::Adventure), &["Action-Adventure", "Adventure", "Atmospheric", "Exploration", "Fantasy", "Open World", "Puzzle", "Story Rich", "Visual Novel"], GENRE_TAG),
    (Target::Genre(Genre::BattleRoyale), &["Battle Royale", "FPS", "Multiplayer", "PvP", "Shooter", "Survival"], GENRE_TAG),
    (Target::Genre(Genre::Casual), &["2D", "Casual", "Cute", "Family Friendly", "Free to Play", "Indie", "Puzzle", "Relaxing", "Simulation"], GENRE_TAG),
    (Target::Genre(Genre::Education), &["Education", "Game Development", "Programming", "Software Training", "Trivia", "Web Publishing"], GENRE_TAG),
    (Target::Genre(Genre::Entertainment), &["Entertainment", "Feature Film", "Movie", "Streaming", "TV", "Video Production"], GENRE_TAG),
    (Target::Genre(Genre::Fighting), &["2D Fighter", "3D Fighter", "Beat 'em up", "Boxing", "Competitive", "Fighting", "Martial Arts", "Wrestling"], GENRE_TAG),
    (Target::Flag(PlatformFlag::FreeToPlay), &["Free to Play"], &[CategoryFlag, TagMapping]),
    (Target::Genre(Genre::Horror), &["Dark", "Gore", "Gothic", "Horror", "Lovecraftian", "Psychological Horror", "Survival Horror", "Thriller", "Vampires", "Zombies"], GENRE_TAG),
    (Target::Flag(PlatformFlag::Is3d), &["3D"], &[TagMapping]),
    (Target::Flag(PlatformFlag::IsCoop), &["Co-op", "Online Co-op"], &[CategoryFlag]),
    (Target::Flag(PlatformFlag::IsEarlyAccess), &["Early Access"], &[CategoryFlag]),
    (Target::Flag(PlatformFlag::IsIndie), &["Indie"], &[CategoryFlag]),
    (Target::Flag(PlatformFlag::IsMultiplayer), &["MMO", "Multi-player", "Multiplayer", "Online PvP", "PvP"], &[CategoryFlag]),
    (Target::Flag(PlatformFlag::IsSingleplayer), &["Single-player"], &[CategoryFlag]),
    (Target::Flag(PlatformFlag::IsSteam), &["Steam Achievements"], &[CategoryFlag]),
    (Target::Flag(PlatformFlag::IsVr), &["VR Only", "VR Support", "VR Supported"], &[CategoryFlag]),
    (Target::Genre(Genre::Music), &["8-bit Music", "Electronic Music", "Instrumental Music", "Music", "Music-Based Procedural Generation", "Rhythm", "Rock Music", "Soundtrack"], GENRE_TAG),
    (Target::Genre(Genre::Puzzle), &["Card Game", "Hidden Object", "Logic", "Match 3", "Puzzle", "Puzzle Platformer", "Sokoban", "Sudoku", "Time Manipulation", "Word Game"], GENRE_TAG),
    (Target::Genre(Genre::Racing), &["ATV", "BMX", "Combat Racing", "Cycling", "Driving", "Motorbike", "Offroad", "Racing", "Vehicular Combat"], GENRE_TAG),
    (Target::Genre(Genre::RolePlayingGame), &["Action RPG", "CRPG", "Dungeon Crawler", "JRPG", "Party-Based RPG", "RPG", "Roguelike", "Roguelite", "Strategy RPG", "Turn-Based RPG"], GENRE_TAG),
    (Target::Genre(Genre::Shooter), &["Arena Shooter", "FPS", "Gun Customization", "Hero Shooter", "Looter Shooter", "On-Rails Shooter", "Shooter", "Tactical Shooter", "Third-Person Shooter", "Twin Stick Shooter"], GENRE_TAG),
    (Target::Genre(Genre::Simulation), &["City Builder", "Colony Sim", "Farming Sim", "Immersive Sim", "Management", "Medical Sim", "Simulation", "Space Sim", "Trading", "Train Sim", "Transportation"], GENRE_TAG),
    (Target::Genre(Genre::Sports), &["Baseball", "Basketball", "Boxing", "Football (American)", "Football (Soccer)", "Golf", "Hockey", "Motocross", "Pool", "Racing", "Rugby", "Skateboarding", "Sports", "Tennis", "Volleyball"], GENRE_TAG),
    (Target::Genre(Genre::Strategy), &["4X", "Card Battler", "Chess", "Deckbuilding", "Grand Strategy", "RTS", "Real Time Tactics", "Strategy", "Strategy RPG", "Tactical RPG", "Tower Defense", "Turn-Based Strategy", "Turn-Based Tactics"], GENRE_TAG),
    (Target::Genre(Genre::Survival), &["Base Building", "Crafting", "Open World Survival Craft", "Resource Management", "Roguelike", "Roguelite", "Survival", "Survival Horror"], GENRE_TAG),
];

// Categories without a Meta label (Battle_Royale, Entertainment, Is_3D,
// Is_Early_Access, Is_Indie, Is_Steam, Is_VR, Free_To_Play) are absent here
// and filled in by inference.
const META_TABLE: &[Row] = &[
    (Target::Genre(Genre::Action), &["Action", "Arcade", "Fighting", "Party Game", "Platformer", "Shooter"], &[GenreKey]),
    (Target::Genre(Genre::Adventure), &["Adventure", "Narrative", "Sandbox", "World Creation"], &[GenreKey]),
    (Target::Genre(Genre::Casual), &["Hangout", "Party Game", "Platformer", "Puzzle", "Tabletop"], &[GenreKey]),
    (Target::Genre(Genre::Education), &["Learning"], &[GenreKey]),
    (Target::Genre(Genre::Fighting), &["Fighting"], &[GenreKey]),
    (Target::Genre(Genre::Horror), &["Survival"], &[GenreKey]),
    (Target::Flag(PlatformFlag::IsCoop), &["Co-op"], &[GameMode]),
    (Target::Flag(PlatformFlag::IsMultiplayer), &["Multiplayer"], &[GameMode]),
    (Target::Flag(PlatformFlag::IsSingleplayer), &["Einzelspieler", "Single User"], &[GameMode]),
    (Target::Genre(Genre::Music), &["Rhythm"], &[GenreKey]),
    (Target::Genre(Genre::Puzzle), &["Puzzle", "Tabletop"], &[GenreKey]),
    (Target::Genre(Genre::Racing), &["Racing"], &[GenreKey]),
    (Target::Genre(Genre::RolePlayingGame), &["Role Playing"], &[GenreKey]),
    (Target::Genre(Genre::Shooter), &["Shooter"], &[GenreKey]),
    (Target::Genre(Genre::Simulation), &["Sandbox", "Simulation", "World Creation"], &[GenreKey]),
    (Target::Genre(Genre::Sports), &["Sports"], &[GenreKey]),
    (Target::Genre(Genre::Strategy), &["Strategy", "Tabletop"], &[GenreKey]),
    (Target::Genre(Genre::Survival), &["Sandbox", "Survival", "World Creation"], &[GenreKey]),
];

type Lookup = HashMap<(KeywordSource, String), Vec<Target>>;

fn build_lookup(table: &[Row]) -> Lookup {
    let mut map: Lookup = HashMap::new();
    for (target, keywords, sources) in table {
        for source in *sources {
            for kw in *keywords {
                map.entry((*source, kw.to_lowercase())).or_default().push(*target);
            }
        }
    }
    map
}

static STEAM_LOOKUP: LazyLock<Lookup> = LazyLock::new(|| build_lookup(STEAM_TABLE));
static META_LOOKUP: LazyLock<Lookup> = LazyLock::new(|| build_lookup(META_TABLE));

/// Counters collected while mapping a batch of games.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappingTally {
    /// Keyword (lower-cased) to number of occurrences that matched no category.
    pub unmatched: BTreeMap<String, usize>,
    /// Games whose price was missing and defaulted to 0.
    pub missing_price: Vec<String>,
    /// Games tagged free-to-play whose price is non-zero (price wins).
    pub free_to_play_conflicts: Vec<String>,
    /// Games whose required age exceeded 21 and was clamped.
    pub age_clamped: Vec<String>,
}

/// Maps a Steam record. The free-to-play flag follows the price.
pub fn map_steam_categories(raw: &RawGameRecord, tally: &mut MappingTally) -> GameMetadata {
    debug_assert_eq!(raw.store, Store::Steam);
    let mut meta = base_metadata(raw, tally);
    let keyword_f2p = apply_keywords(raw, &STEAM_LOOKUP, &mut meta, tally);
    let free = meta.price_usd == 0.0;
    if keyword_f2p && !free {
        tally.free_to_play_conflicts.push(raw.game_id.clone());
    }
    meta.set_flag(PlatformFlag::FreeToPlay, free);
    meta
}

/// Maps a Meta record, inferring the flags Meta does not label.
pub fn map_meta_categories(raw: &RawGameRecord, tally: &mut MappingTally) -> GameMetadata {
    debug_assert_eq!(raw.store, Store::Meta);
    let mut meta = base_metadata(raw, tally);
    apply_keywords(raw, &META_LOOKUP, &mut meta, tally);
    meta.set_flag(PlatformFlag::FreeToPlay, meta.price_usd == 0.0);
    meta.set_flag(PlatformFlag::IsSteam, false);
    meta.set_flag(PlatformFlag::IsVr, true);
    meta.set_flag(PlatformFlag::Is3d, true);
    meta
}

/// Dispatches on the record's store.
pub fn map_categories(raw: &RawGameRecord, tally: &mut MappingTally) -> GameMetadata {
    match raw.store {
        Store::Steam => map_steam_categories(raw, tally),
        Store::Meta => map_meta_categories(raw, tally),
    }
}

fn base_metadata(raw: &RawGameRecord, tally: &mut MappingTally) -> GameMetadata {
    let price_usd = raw.price_usd.unwrap_or_else(|| {
        tally.missing_price.push(raw.game_id.clone());
        0.0
    });
    let age = raw.required_age.unwrap_or(0);
    if age > 21 {
        tally.age_clamped.push(raw.game_id.clone());
    }
    let age = age.min(21);
    GameMetadata {
        game_id: raw.game_id.clone(),
        name: raw.name.clone(),
        store: raw.store,
        release_year: raw.release_date.year(),
        price_usd,
        // Raw prices were validated as finite and non-negative on parse.
        price_category: price_category_from_price(price_usd).expect("validated price"),
        required_age: age as u8,
        pegi: pegi_bucket(i64::from(age)).expect("age clamped to 0..=21"),
        platform: [false; 9],
        genres: [false; Genre::COUNT],
    }
}

/// Sets every matched flag; returns whether a free-to-play keyword matched.
fn apply_keywords(
    raw: &RawGameRecord,
    lookup: &Lookup,
    meta: &mut GameMetadata,
    tally: &mut MappingTally,
) -> bool {
    let mut f2p = false;
    for (source, keywords) in &raw.keyword_bags {
        for kw in keywords {
            let key = kw.trim().to_lowercase();
            match lookup.get(&(*source, key)) {
                Some(targets) => {
                    for t in targets {
                        match *t {
                            Target::Genre(g) => meta.genres[g.index()] = true,
                            Target::Flag(PlatformFlag::FreeToPlay) => f2p = true,
                            Target::Flag(f) => meta.set_flag(f, true),
                        }
                    }
                }
                None => {
                    *tally.unmatched.entry(kw.trim().to_lowercase()).or_default() += 1;
                }
            }
        }
    }
    f2p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ReleaseDate;
    use crate::schema::PriceCategory;
    use proptest::prelude::*;

    fn steam(bags: &[(KeywordSource, &[&str])], price: f64) -> RawGameRecord {
        RawGameRecord {
            game_id: "1".into(),
            name: "g".into(),
            store: Store::Steam,
            release_date: ReleaseDate::Unparsed(String::new()),
            price_usd: Some(price),
            required_age: Some(0),
            keyword_bags: bags
                .iter()
                .map(|(k, v)| (*k, v.iter().map(|s| s.to_string()).collect()))
                .collect(),
            review_count: 30,
        }
    }

    #[test]
    fn hack_and_slash_is_action() {
        let m = map_steam_categories(&steam(&[(TagMapping, &["Hack and Slash"])], 9.99), &mut MappingTally::default());
        assert!(m.has_genre(Genre::Action));
        assert_eq!(m.set_genres().count(), 1);
    }

    #[test]
    fn vr_only_flag() {
        let m = map_steam_categories(&steam(&[(CategoryFlag, &["VR Only"])], 9.99), &mut MappingTally::default());
        assert!(m.is_vr());
    }

    #[test]
    fn source_key_is_respected() {
        // "VR Only" is a category flag, not a tag.
        let m = map_steam_categories(&steam(&[(TagMapping, &["VR Only"])], 9.99), &mut MappingTally::default());
        assert!(!m.is_vr());
    }

    #[test]
    fn empty_bags_all_zero() {
        let m = map_steam_categories(&steam(&[], 9.99), &mut MappingTally::default());
        assert!(m.platform.iter().all(|f| !f));
        assert!(m.genres.iter().all(|f| !f));
        assert_eq!(m.price_category, PriceCategory::MidPricedIndie);
    }

    #[test]
    fn whole_tag_match_only() {
        let mut tally = MappingTally::default();
        let m = map_steam_categories(&steam(&[(GenreKey, &["Combat Racing Deluxe"])], 1.0), &mut tally);
        assert!(m.genres.iter().all(|f| !f));
        assert_eq!(tally.unmatched.get("combat racing deluxe"), Some(&1));
    }

    #[test]
    fn free_to_play_follows_price() {
        let mut tally = MappingTally::default();
        let m = map_steam_categories(&steam(&[(TagMapping, &["Free to Play"])], 0.0), &mut tally);
        assert!(m.flag(PlatformFlag::FreeToPlay));
        assert!(m.has_genre(Genre::Casual));
        let m = map_steam_categories(&steam(&[(TagMapping, &["Free to Play"])], 4.0), &mut tally);
        assert!(!m.flag(PlatformFlag::FreeToPlay));
        assert_eq!(tally.free_to_play_conflicts, vec!["1".to_string()]);
    }

    fn meta(genres: &[&str], modes: &[&str], price: f64) -> RawGameRecord {
        let mut r = steam(&[], price);
        r.store = Store::Meta;
        r.keyword_bags.insert(GenreKey, genres.iter().map(|s| s.to_string()).collect());
        r.keyword_bags.insert(GameMode, modes.iter().map(|s| s.to_string()).collect());
        r
    }

    #[test]
    fn meta_inference() {
        let mut tally = MappingTally::default();
        let m = map_meta_categories(&meta(&["Rhythm"], &["Einzelspieler"], 0.0), &mut tally);
        assert!(m.has_genre(Genre::Music));
        assert!(m.flag(PlatformFlag::IsSingleplayer));
        assert!(m.flag(PlatformFlag::FreeToPlay));
        assert!(m.is_vr() && m.flag(PlatformFlag::Is3d) && !m.flag(PlatformFlag::IsSteam));
        assert!(!m.flag(PlatformFlag::IsIndie) && !m.flag(PlatformFlag::IsEarlyAccess));
        assert!(!m.has_genre(Genre::BattleRoyale) && !m.has_genre(Genre::Entertainment));
        let m = map_meta_categories(&meta(&["Shooter"], &[], 19.99), &mut tally);
        assert!(!m.flag(PlatformFlag::FreeToPlay));
        assert!(m.has_genre(Genre::Action) && m.has_genre(Genre::Shooter));
    }

    const POOL: &[&str] = &["Action", "RPG", "Roguelike", "VR Only", "Indie", "Single-player", "Puzzle", "racing", "3D", "Unknown Tag", "Steam Achievements"];

    proptest! {
        #[test]
        fn order_and_case_independent(picks in proptest::collection::vec((0usize..POOL.len(), 0usize..3, any::<bool>()), 0..12), seed in any::<u64>()) {
            let sources = [GenreKey, TagMapping, CategoryFlag];
            let mut rec = steam(&[], 3.0);
            for (i, s, _) in &picks {
                rec.keyword_bags.entry(sources[*s]).or_default().push(POOL[*i].to_string());
            }
            let base = map_steam_categories(&rec, &mut MappingTally::default());

            let mut shuffled = rec.clone();
            for (n, bag) in shuffled.keyword_bags.values_mut().enumerate() {
                bag.reverse();
                let len = bag.len();
                if len > 1 { bag.rotate_left((seed as usize + n) % len); }
                for (j, kw) in bag.iter_mut().enumerate() {
                    if (seed >> (j % 64)) & 1 == 1 { *kw = kw.to_uppercase(); } else { *kw = kw.to_lowercase(); }
                }
            }
            prop_assert_eq!(map_steam_categories(&shuffled, &mut MappingTally::default()), base.clone());
            // idempotent
            prop_assert_eq!(map_steam_categories(&rec, &mut MappingTally::default()), base);
        }

        #[test]
        fn meta_always_vr(picks in proptest::collection::vec(0usize..POOL.len(), 0..6), price in 0.0f64..60.0) {
            let genres: Vec<&str> = picks.iter().map(|i| POOL[*i]).collect();
            let m = map_meta_categories(&meta(&genres, &[], price), &mut MappingTally::default());
            prop_assert!(m.is_vr() && m.flag(PlatformFlag::Is3d) && !m.flag(PlatformFlag::IsSteam));
        }
    }
}
