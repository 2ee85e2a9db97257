//! Finite universes, reachability, evaluation of maps and the search for
//! the best one.

mod best;
mod evaluate;
mod offset;
mod random;
mod reach;
mod universe;

pub use best::{exhaustive_best_map, search_best_map, SearchMode, SearchOutcome};
pub use evaluate::{end_ratio, evaluate_map, CompetitiveReport, EndRecord};
pub use offset::{offset_split, offsets_hitting_window, OffsetReport, OffsetVariant};
pub use random::{discretize_map, discretize_probs, evaluate_randomized_map, random_randomized_map};
pub use reach::{detect_cycle, reachable_classes, verify_cycle, Cycle, Reach, ReachableSets};
pub use universe::{build_universe, Catalog, JobTemplate, Universe, UniverseSpec};
