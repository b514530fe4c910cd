//! Name pools shipped as plain-text resources, one entry per line.

use crate::error::GenerationError;

const FIRST_NAMES: &str = include_str!("../../resources/pools/first_names.txt");
const LAST_NAMES: &str = include_str!("../../resources/pools/last_names.txt");

const LABEL_POOLS: [(&str, &str); 11] = [
    ("cities", include_str!("../../resources/pools/cities.txt")),
    (
        "departments",
        include_str!("../../resources/pools/departments.txt"),
    ),
    (
        "projects",
        include_str!("../../resources/pools/projects.txt"),
    ),
    ("rooms", include_str!("../../resources/pools/rooms.txt")),
    (
        "target_groups",
        include_str!("../../resources/pools/target_groups.txt"),
    ),
    ("teams", include_str!("../../resources/pools/teams.txt")),
    ("topics", include_str!("../../resources/pools/topics.txt")),
    ("vendors", include_str!("../../resources/pools/vendors.txt")),
    ("venues", include_str!("../../resources/pools/venues.txt")),
    (
        "websites",
        include_str!("../../resources/pools/websites.txt"),
    ),
    ("words", include_str!("../../resources/pools/words.txt")),
];

/// The agent's own name; never handed to an NPC.
pub const AGENT_NAME: &str = "Alice Smith";

pub fn parse(text: &str) -> Vec<&str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect()
}

pub fn first_names() -> Vec<&'static str> {
    parse(FIRST_NAMES)
}

pub fn last_names() -> Vec<&'static str> {
    parse(LAST_NAMES)
}

pub fn label_pool(name: &str) -> Result<Vec<&'static str>, GenerationError> {
    LABEL_POOLS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse(text))
        .ok_or_else(|| GenerationError::UnknownPool(name.to_string()))
}

pub fn pool_names() -> impl Iterator<Item = &'static str> {
    LABEL_POOLS.iter().map(|(n, _)| *n)
}
