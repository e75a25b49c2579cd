//! Documents shipped with the library, addressable by name.

const DOCS: &[(&str, &str)] = &[
    ("z4", include_str!("../data/z4.json")),
    ("z5", include_str!("../data/z5.json")),
    ("mlp2", include_str!("../data/mlp2.json")),
    ("ex1-chain", include_str!("../data/ex1-chain.json")),
    ("ex3-joint", include_str!("../data/ex3-joint.json")),
    ("eq7-chain", include_str!("../data/eq7-chain.json")),
    ("ex3-function", include_str!("../data/ex3-function.json")),
    ("ex3", include_str!("../data/ex3.json")),
    ("pres-z4", include_str!("../data/pres-z4.json")),
    ("pres-z5", include_str!("../data/pres-z5.json")),
    ("pres-z5-alt", include_str!("../data/pres-z5-alt.json")),
    ("ex4-schedule", include_str!("../data/ex4-schedule.json")),
    ("sim-ex1", include_str!("../data/sim-ex1.json")),
    ("sim-ex3", include_str!("../data/sim-ex3.json")),
];

/// Text of a built-in document. Accepts `name`, `name.json` or `name.doc`.
pub fn get(name: &str) -> Option<&'static str> {
    let stem = name
        .strip_suffix(".json")
        .or_else(|| name.strip_suffix(".doc"))
        .unwrap_or(name);
    DOCS.iter().find(|(n, _)| *n == stem).map(|(_, text)| *text)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    DOCS.iter().map(|(n, _)| *n)
}
