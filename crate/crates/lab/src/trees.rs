//! Named family trees and tree resolution from a config section.

use std::path::Path;

use kgstitch_core::kg::{synthetic_tree_in_range, BaseFacts};

use crate::config::TreeSection;
use crate::error::{LabError, LabResult};
use crate::format::{read_json, FactsDoc};

/// Curated trees shipped with the crate, by identifier.
pub const NAMED_TREES: [(&str, &str); 3] = [
    ("kennedy", include_str!("../data/kennedy.json")),
    ("nehru_gandhi", include_str!("../data/nehru_gandhi.json")),
    ("rothschild", include_str!("../data/rothschild.json")),
];

pub fn named_tree(name: &str) -> LabResult<BaseFacts> {
    let (_, text) = NAMED_TREES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| LabError::Config(format!("no named tree `{name}`")))?;
    let doc: FactsDoc = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
    doc.to_facts()
}

/// Builds the tree a section describes. For synthetic trees the seed that
/// produced an accepted size is returned alongside.
pub fn resolve_tree(section: &TreeSection) -> LabResult<(BaseFacts, Option<u64>)> {
    match section.source.as_str() {
        "synthetic" => {
            let (facts, seed) = synthetic_tree_in_range(
                section.generations,
                section.max_children,
                section.spouse_probability,
                section.tree_seed,
                section.min_persons..=section.max_persons,
            )?;
            Ok((facts, Some(seed)))
        }
        name if NAMED_TREES.iter().any(|(n, _)| *n == name) => Ok((named_tree(name)?, None)),
        path => {
            let doc: FactsDoc = read_json(Path::new(path))?;
            Ok((doc.to_facts()?, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use kgstitch_core::kg::{check_property, derive_kg, PropertySpec, RelationSet};

    #[test]
    fn named_trees_load_and_satisfy_kinship_laws() {
        for (name, _) in NAMED_TREES {
            let facts = named_tree(name).unwrap();
            assert!(facts.len() >= 25, "{name}");
            let kg = derive_kg(&facts, RelationSet::Full18);
            let spec = PropertySpec::meta_transitive(
                "father|mother",
                "father|mother",
                "grandfather|grandmother",
            );
            assert!(check_property(&kg, &spec).unwrap().is_empty(), "{name}");
            assert!(check_property(&kg, &PropertySpec::transitive("ancestor"))
                .unwrap()
                .is_empty());
        }
    }

    #[test]
    fn synthetic_respects_size_range() {
        let (facts, seed) = resolve_tree(&TreeSection::default()).unwrap();
        assert!((28..=32).contains(&facts.len()));
        assert!(seed.is_some());
        let missing = TreeSection {
            source: "/nonexistent/facts.json".into(),
            ..TreeSection::default()
        };
        assert!(matches!(resolve_tree(&missing), Err(LabError::Config(_))));
    }
}
