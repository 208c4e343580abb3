//! Knowledge graphs over a fixed object set, family-tree generation and
//! kinship derivation, logical property checks and train/test splits.
//!
//! Relations are read as "subject is R of object": `father(i, j)` means
//! person `i` is the father of person `j`, and `descendant(i, j)` means `i`
//! is a descendant of `j` (equivalently, `j` is an ancestor of `i`).

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// The eighteen kinship relations derived by [`RelationSet::Full18`], in
/// output-head order.
pub const FULL_18: [&str; 18] = [
    "father",
    "mother",
    "husband",
    "wife",
    "son",
    "daughter",
    "brother",
    "sister",
    "grandfather",
    "grandmother",
    "aunt",
    "uncle",
    "nephew",
    "niece",
    "brother-in-law",
    "sister-in-law",
    "ancestor",
    "descendant",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn opposite(self) -> Self {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl core::str::FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "male" | "m" | "M" => Ok(Gender::Male),
            "female" | "f" | "F" => Ok(Gender::Female),
            other => Err(Error::InvalidParameter(format!("unknown gender `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Person {
    pub id: String,
    pub gender: Gender,
}

impl Person {
    pub fn new(id: impl Into<String>, gender: Gender) -> Self {
        Person {
            id: id.into(),
            gender,
        }
    }
}

/// Raw genealogical facts: persons, parent-of pairs and spouse pairs.
///
/// Validated on construction:
/// - identifiers are unique and all indices are in range,
/// - the parent graph is acyclic and nobody has more than two parents,
/// - spouse pairs join two distinct persons of opposite gender and never
///   coincide with a parent pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseFacts {
    persons: Vec<Person>,
    parent_pairs: BTreeSet<(usize, usize)>,
    // Stored as (min, max).
    spouse_pairs: BTreeSet<(usize, usize)>,
}

impl BaseFacts {
    pub fn new(
        persons: Vec<Person>,
        parent_pairs: impl IntoIterator<Item = (usize, usize)>,
        spouse_pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = persons.len();
        let mut ids = BTreeSet::new();
        for p in &persons {
            if !ids.insert(p.id.as_str()) {
                return Err(Error::MalformedFacts(format!(
                    "duplicate person `{}`",
                    p.id
                )));
            }
        }
        let parent_pairs: BTreeSet<(usize, usize)> = parent_pairs.into_iter().collect();
        let mut parent_count = vec![0usize; n];
        for &(p, c) in &parent_pairs {
            if p >= n || c >= n {
                return Err(Error::MalformedFacts(format!(
                    "parent pair ({p}, {c}) out of range for {n} persons"
                )));
            }
            if p == c {
                return Err(Error::MalformedFacts(format!(
                    "`{}` is listed as their own parent",
                    persons[p].id
                )));
            }
            parent_count[c] += 1;
            if parent_count[c] > 2 {
                return Err(Error::MalformedFacts(format!(
                    "`{}` has more than two parents",
                    persons[c].id
                )));
            }
        }
        let mut spouses = BTreeSet::new();
        for (a, b) in spouse_pairs {
            if a >= n || b >= n {
                return Err(Error::MalformedFacts(format!(
                    "spouse pair ({a}, {b}) out of range for {n} persons"
                )));
            }
            if a == b {
                return Err(Error::MalformedFacts(format!(
                    "`{}` is listed as their own spouse",
                    persons[a].id
                )));
            }
            if persons[a].gender == persons[b].gender {
                return Err(Error::MalformedFacts(format!(
                    "spouses `{}` and `{}` have the same gender",
                    persons[a].id, persons[b].id
                )));
            }
            if parent_pairs.contains(&(a, b)) || parent_pairs.contains(&(b, a)) {
                return Err(Error::MalformedFacts(format!(
                    "`{}` and `{}` are both spouses and parent/child",
                    persons[a].id, persons[b].id
                )));
            }
            spouses.insert((a.min(b), a.max(b)));
        }
        let facts = BaseFacts {
            persons,
            parent_pairs,
            spouse_pairs: spouses,
        };
        if let Some(i) = facts.find_cycle() {
            return Err(Error::MalformedFacts(format!(
                "`{}` is their own ancestor",
                facts.persons[i].id
            )));
        }
        Ok(facts)
    }

    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn persons(&self) -> &[Person] {
        &self.persons
    }

    pub fn parent_pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.parent_pairs
    }

    pub fn spouse_pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.spouse_pairs
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.persons.iter().position(|p| p.id == id)
    }

    pub fn parents_of(&self, child: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent_pairs
            .iter()
            .filter(move |&&(_, c)| c == child)
            .map(|&(p, _)| p)
    }

    pub fn genders(&self) -> Vec<Gender> {
        self.persons.iter().map(|p| p.gender).collect()
    }

    /// Generation index per person: founders are generation 0, a child is
    /// one below its deepest parent, and a person without parents who
    /// married into the family takes the generation of their spouse.
    pub fn generations(&self) -> Vec<usize> {
        let n = self.len();
        let mut parents = vec![Vec::new(); n];
        for &(p, c) in &self.parent_pairs {
            parents[c].push(p);
        }
        let mut gen: Vec<Option<usize>> = vec![None; n];
        fn visit(i: usize, parents: &[Vec<usize>], gen: &mut [Option<usize>]) -> usize {
            if let Some(g) = gen[i] {
                return g;
            }
            let g = parents[i]
                .iter()
                .map(|&p| visit(p, parents, gen) + 1)
                .max()
                .unwrap_or(0);
            gen[i] = Some(g);
            g
        }
        for i in 0..n {
            visit(i, &parents, &mut gen);
        }
        let mut out: Vec<usize> = gen.into_iter().map(|g| g.unwrap_or(0)).collect();
        let snapshot = out.clone();
        for &(a, b) in &self.spouse_pairs {
            if parents[a].is_empty() && !parents[b].is_empty() {
                out[a] = snapshot[b];
            } else if parents[b].is_empty() && !parents[a].is_empty() {
                out[b] = snapshot[a];
            }
        }
        out
    }

    fn find_cycle(&self) -> Option<usize> {
        let n = self.len();
        let mut children = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        for &(p, c) in &self.parent_pairs {
            children[p].push(c);
            indegree[c] += 1;
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = queue.pop_front() {
            seen += 1;
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if seen == n {
            None
        } else {
            indegree.iter().position(|&d| d > 0)
        }
    }
}

/// Generates a random family tree.
///
/// A founder (plus a spouse with probability `spouse_probability`) starts
/// generation 0. Every blood member of a non-final generation has a uniform
/// number of children in `0..=max_children`, shared with their spouse when
/// they have one; every child marries in a spouse without recorded parents
/// with probability `spouse_probability`. Founders and married-in spouses
/// are the only persons without parents.
pub fn generate_synthetic_tree(
    generations: usize,
    max_children: usize,
    spouse_probability: f64,
    seed: u64,
) -> Result<BaseFacts> {
    if generations == 0 {
        return Err(Error::InvalidParameter(
            "generations must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spouse_probability) {
        return Err(Error::InvalidParameter(format!(
            "spouse probability {spouse_probability} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut persons: Vec<Person> = Vec::new();
    let mut parents = Vec::new();
    let mut spouses = Vec::new();
    let mut spouse_of: BTreeMap<usize, usize> = BTreeMap::new();

    let add = |persons: &mut Vec<Person>, gender: Gender| {
        let idx = persons.len();
        persons.push(Person::new(format!("P{idx:02}"), gender));
        idx
    };
    let maybe_marry = |persons: &mut Vec<Person>,
                       rng: &mut ChaCha8Rng,
                       spouses: &mut Vec<(usize, usize)>,
                       spouse_of: &mut BTreeMap<usize, usize>,
                       who: usize| {
        if rng.random_bool(spouse_probability) {
            let partner = add(persons, persons[who].gender.opposite());
            spouses.push((who, partner));
            spouse_of.insert(who, partner);
        }
    };

    let founder_gender = random_gender(&mut rng);
    let founder = add(&mut persons, founder_gender);
    maybe_marry(
        &mut persons,
        &mut rng,
        &mut spouses,
        &mut spouse_of,
        founder,
    );

    let mut current = vec![founder];
    for _ in 1..generations {
        let mut next = Vec::new();
        for &member in &current {
            let count = rng.random_range(0..=max_children);
            for _ in 0..count {
                let gender = random_gender(&mut rng);
                let child = add(&mut persons, gender);
                parents.push((member, child));
                if let Some(&partner) = spouse_of.get(&member) {
                    parents.push((partner, child));
                }
                maybe_marry(&mut persons, &mut rng, &mut spouses, &mut spouse_of, child);
                next.push(child);
            }
        }
        current = next;
    }
    BaseFacts::new(persons, parents, spouses)
}

fn random_gender(rng: &mut ChaCha8Rng) -> Gender {
    if rng.random_bool(0.5) {
        Gender::Male
    } else {
        Gender::Female
    }
}

/// Searches seeds `seed, seed + 1, ...` for a synthetic tree with exactly
/// `generations` generations and a person count inside `persons`.
pub fn synthetic_tree_in_range(
    generations: usize,
    max_children: usize,
    spouse_probability: f64,
    seed: u64,
    persons: core::ops::RangeInclusive<usize>,
) -> Result<(BaseFacts, u64)> {
    for offset in 0..10_000u64 {
        let s = seed.wrapping_add(offset);
        let facts = generate_synthetic_tree(generations, max_children, spouse_probability, s)?;
        let depth = facts.generations().into_iter().max().unwrap_or(0) + 1;
        if depth == generations && persons.contains(&facts.len()) {
            return Ok((facts, s));
        }
    }
    Err(Error::InvalidParameter(format!(
        "no seed near {seed} yields {generations} generations with {persons:?} persons"
    )))
}

/// A set of objects with named binary relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeGraph {
    objects: Vec<String>,
    relations: Vec<String>,
    edges: Vec<BTreeSet<(usize, usize)>>,
    // Row-major n*n adjacency per relation.
    dense: Vec<Vec<bool>>,
}

impl KnowledgeGraph {
    /// Builds a graph, rejecting out-of-range indices, duplicate relation or
    /// object names and duplicate pairs within a relation.
    pub fn new(
        objects: Vec<String>,
        relations: Vec<String>,
        edges: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        let n = objects.len();
        if relations.len() != edges.len() {
            return Err(Error::MalformedGraph(format!(
                "{} relation names but {} edge lists",
                relations.len(),
                edges.len()
            )));
        }
        let mut names = BTreeSet::new();
        for r in &relations {
            if !names.insert(r.as_str()) {
                return Err(Error::MalformedGraph(format!("duplicate relation `{r}`")));
            }
        }
        let mut ids = BTreeSet::new();
        for o in &objects {
            if !ids.insert(o.as_str()) {
                return Err(Error::MalformedGraph(format!("duplicate object `{o}`")));
            }
        }
        let mut sets = Vec::with_capacity(edges.len());
        let mut dense = Vec::with_capacity(edges.len());
        for (k, list) in edges.into_iter().enumerate() {
            let mut set = BTreeSet::new();
            let mut adj = vec![false; n * n];
            for (i, j) in list {
                if i >= n || j >= n {
                    return Err(Error::MalformedGraph(format!(
                        "edge ({i}, {j}) of `{}` out of range for {n} objects",
                        relations[k]
                    )));
                }
                if !set.insert((i, j)) {
                    return Err(Error::MalformedGraph(format!(
                        "duplicate edge ({i}, {j}) in `{}`",
                        relations[k]
                    )));
                }
                adj[i * n + j] = true;
            }
            sets.push(set);
            dense.push(adj);
        }
        Ok(KnowledgeGraph {
            objects,
            relations,
            edges: sets,
            dense,
        })
    }

    fn from_dense(objects: Vec<String>, relations: Vec<String>, dense: Vec<Vec<bool>>) -> Self {
        let n = objects.len();
        let edges = dense
            .iter()
            .map(|adj| {
                (0..n * n)
                    .filter(|&x| adj[x])
                    .map(|x| (x / n, x % n))
                    .collect()
            })
            .collect();
        KnowledgeGraph {
            objects,
            relations,
            edges,
            dense,
        }
    }

    /// Number of objects.
    pub fn n(&self) -> usize {
        self.objects.len()
    }

    /// Number of relations.
    pub fn m(&self) -> usize {
        self.relations.len()
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn edges(&self, relation: usize) -> &BTreeSet<(usize, usize)> {
        &self.edges[relation]
    }

    #[inline]
    pub fn holds(&self, relation: usize, subject: usize, object: usize) -> bool {
        self.dense[relation][subject * self.n() + object]
    }

    pub fn relation_index(&self, name: &str) -> Result<usize> {
        self.relations
            .iter()
            .position(|r| r == name)
            .ok_or_else(|| Error::UnknownRelation(name.into()))
    }

    pub fn object_index(&self, id: &str) -> Result<usize> {
        self.objects
            .iter()
            .position(|o| o == id)
            .ok_or_else(|| Error::UnknownObject(id.into()))
    }

    /// Every labeled triple `(k, i, j)`, self-pairs included, ordered by
    /// relation then subject then object.
    pub fn all_triples(&self) -> Vec<Triple> {
        let n = self.n();
        let mut out = Vec::with_capacity(self.m() * n * n);
        for relation in 0..self.m() {
            for subject in 0..n {
                for object in 0..n {
                    out.push(Triple {
                        relation,
                        subject,
                        object,
                        label: self.holds(relation, subject, object),
                    });
                }
            }
        }
        out
    }

    /// Keeps only the named relations, in the given order.
    pub fn restrict(&self, names: &[&str]) -> Result<KnowledgeGraph> {
        let mut relations = Vec::new();
        let mut dense = Vec::new();
        for name in names {
            let k = self.relation_index(name)?;
            relations.push(self.relations[k].clone());
            dense.push(self.dense[k].clone());
        }
        Ok(KnowledgeGraph::from_dense(
            self.objects.clone(),
            relations,
            dense,
        ))
    }
}

/// Which relations [`derive_kg`] produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationSet {
    /// The single relation `descendant`.
    DescendantOnly,
    /// The eighteen relations of [`FULL_18`].
    Full18,
}

impl core::str::FromStr for RelationSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "descendant_only" | "descendant" | "desc" => Ok(RelationSet::DescendantOnly),
            "full_18" | "full" => Ok(RelationSet::Full18),
            other => Err(Error::InvalidParameter(format!(
                "unknown relation set `{other}`"
            ))),
        }
    }
}

/// Square boolean matrix helpers for the kinship rules.
struct BoolMat {
    n: usize,
    data: Vec<bool>,
}

impl BoolMat {
    fn zeros(n: usize) -> Self {
        BoolMat {
            n,
            data: vec![false; n * n],
        }
    }

    fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize) {
        self.data[i * self.n + j] = true;
    }

    fn compose(&self, other: &BoolMat) -> BoolMat {
        let n = self.n;
        let mut out = BoolMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                if self.get(i, k) {
                    for j in 0..n {
                        if other.get(k, j) {
                            out.set(i, j);
                        }
                    }
                }
            }
        }
        out
    }

    fn union(&self, other: &BoolMat) -> BoolMat {
        BoolMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    fn transpose(&self) -> BoolMat {
        let n = self.n;
        let mut out = BoolMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if self.get(i, j) {
                    out.set(j, i);
                }
            }
        }
        out
    }

    /// Keeps `(i, j)` only where `i != j` and the subject has `gender`.
    fn gendered(&self, genders: &[Gender], gender: Option<Gender>) -> Vec<bool> {
        let n = self.n;
        let mut out = vec![false; n * n];
        for i in 0..n {
            if gender.is_some_and(|g| genders[i] != g) {
                continue;
            }
            for j in 0..n {
                out[i * n + j] = i != j && self.get(i, j);
            }
        }
        out
    }
}

/// Derives kinship relations from base facts.
///
/// Rules (subject `i`, object `j`): father/mother are parents by gender,
/// son/daughter children by gender, husband/wife spouses by gender,
/// brother/sister distinct persons sharing at least one parent,
/// grandfather/grandmother parent-of-parent, ancestor the transitive
/// closure of parent-of and descendant its converse. An uncle/aunt is a
/// sibling of a parent or the spouse of such a sibling; nephew/niece is the
/// converse gendered by the subject. A brother/sister-in-law is a sibling of
/// a spouse or the spouse of a sibling. Self-pairs never hold.
pub fn derive_kg(base: &BaseFacts, relation_set: RelationSet) -> KnowledgeGraph {
    let n = base.len();
    let genders = base.genders();
    let mut parent = BoolMat::zeros(n);
    for &(p, c) in base.parent_pairs() {
        parent.set(p, c);
    }
    let mut ancestor = BoolMat::zeros(n);
    // Parent graph is acyclic, so a DFS from every person is enough.
    for start in 0..n {
        let mut stack: Vec<usize> = (0..n).filter(|&c| parent.get(start, c)).collect();
        while let Some(c) = stack.pop() {
            if !ancestor.get(start, c) {
                ancestor.set(start, c);
                stack.extend((0..n).filter(|&d| parent.get(c, d)));
            }
        }
    }
    let objects: Vec<String> = base.persons().iter().map(|p| p.id.clone()).collect();

    if relation_set == RelationSet::DescendantOnly {
        let descendant = ancestor.transpose();
        return KnowledgeGraph::from_dense(
            objects,
            vec!["descendant".to_string()],
            vec![descendant.gendered(&genders, None)],
        );
    }

    let mut spouse = BoolMat::zeros(n);
    for &(a, b) in base.spouse_pairs() {
        spouse.set(a, b);
        spouse.set(b, a);
    }
    let child = parent.transpose();
    // Shares a parent; the diagonal is dropped by `gendered`.
    let sibling = child.compose(&parent);
    let grandparent = parent.compose(&parent);
    let parents_sibling = sibling.compose(&parent);
    let uncle_aunt = parents_sibling.union(&spouse.compose(&parents_sibling));
    let in_law = sibling.compose(&spouse).union(&spouse.compose(&sibling));

    let m = Some(Gender::Male);
    let f = Some(Gender::Female);
    let dense = vec![
        parent.gendered(&genders, m),
        parent.gendered(&genders, f),
        spouse.gendered(&genders, m),
        spouse.gendered(&genders, f),
        child.gendered(&genders, m),
        child.gendered(&genders, f),
        sibling.gendered(&genders, m),
        sibling.gendered(&genders, f),
        grandparent.gendered(&genders, m),
        grandparent.gendered(&genders, f),
        uncle_aunt.gendered(&genders, f),
        uncle_aunt.gendered(&genders, m),
        uncle_aunt.transpose().gendered(&genders, m),
        uncle_aunt.transpose().gendered(&genders, f),
        in_law.gendered(&genders, m),
        in_law.gendered(&genders, f),
        ancestor.gendered(&genders, None),
        ancestor.transpose().gendered(&genders, None),
    ];
    KnowledgeGraph::from_dense(
        objects,
        FULL_18.iter().map(|s| s.to_string()).collect(),
        dense,
    )
}

/// The greater-than graph on `n` objects: edge `(i, j)` iff `i > j`.
pub fn greater_than_kg(n: usize) -> Result<KnowledgeGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "greater-than graph needs n >= 2, got {n}"
        )));
    }
    let objects = (0..n).map(|i| i.to_string()).collect();
    let edges = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    KnowledgeGraph::new(objects, vec!["greater_than".into()], vec![edges])
}

/// A relation, or the union of several, referenced by name. Parsed from
/// strings such as `"father|mother"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RelationRef(Vec<String>);

impl RelationRef {
    pub fn union<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        RelationRef(names.into_iter().map(Into::into).collect())
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    fn resolve(&self, kg: &KnowledgeGraph) -> Result<Vec<usize>> {
        if self.0.is_empty() {
            return Err(Error::UnknownRelation(String::new()));
        }
        self.0.iter().map(|name| kg.relation_index(name)).collect()
    }
}

impl From<&str> for RelationRef {
    fn from(s: &str) -> Self {
        RelationRef(s.split('|').map(|p| p.trim().to_string()).collect())
    }
}

impl core::fmt::Display for RelationRef {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0.join("|"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PropertyKind {
    Symmetric,
    Antisymmetric,
    Transitive,
    /// `r1(i, j) and r2(j, k) implies r3(i, k)`.
    MetaTransitive,
}

impl PropertyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PropertyKind::Symmetric => "symmetric",
            PropertyKind::Antisymmetric => "antisymmetric",
            PropertyKind::Transitive => "transitive",
            PropertyKind::MetaTransitive => "meta_transitive",
        }
    }
}

impl core::str::FromStr for PropertyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(PropertyKind::Symmetric),
            "antisymmetric" => Ok(PropertyKind::Antisymmetric),
            "transitive" => Ok(PropertyKind::Transitive),
            "meta_transitive" => Ok(PropertyKind::MetaTransitive),
            other => Err(Error::InvalidParameter(format!(
                "unknown property `{other}`"
            ))),
        }
    }
}

/// A logical identity over one or three relations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PropertySpec {
    pub kind: PropertyKind,
    pub relations: Vec<RelationRef>,
}

impl PropertySpec {
    pub fn new(kind: PropertyKind, relations: Vec<RelationRef>) -> Result<Self> {
        let arity = match kind {
            PropertyKind::MetaTransitive => 3,
            _ => 1,
        };
        if relations.len() != arity {
            return Err(Error::InvalidParameter(format!(
                "{} takes {arity} relation(s), got {}",
                kind.as_str(),
                relations.len()
            )));
        }
        Ok(PropertySpec { kind, relations })
    }

    pub fn symmetric(r: impl Into<RelationRef>) -> Self {
        PropertySpec {
            kind: PropertyKind::Symmetric,
            relations: vec![r.into()],
        }
    }

    pub fn antisymmetric(r: impl Into<RelationRef>) -> Self {
        PropertySpec {
            kind: PropertyKind::Antisymmetric,
            relations: vec![r.into()],
        }
    }

    pub fn transitive(r: impl Into<RelationRef>) -> Self {
        PropertySpec {
            kind: PropertyKind::Transitive,
            relations: vec![r.into()],
        }
    }

    pub fn meta_transitive(
        r1: impl Into<RelationRef>,
        r2: impl Into<RelationRef>,
        r3: impl Into<RelationRef>,
    ) -> Self {
        PropertySpec {
            kind: PropertyKind::MetaTransitive,
            relations: vec![r1.into(), r2.into(), r3.into()],
        }
    }
}

impl core::fmt::Display for PropertySpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}(", self.kind.as_str())?;
        for (idx, r) in self.relations.iter().enumerate() {
            if idx > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str(")")
    }
}

/// A witness against a property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    Pair(usize, usize),
    Triple(usize, usize, usize),
}

/// Returns every witness violating `spec` on `kg`, exhaustively.
///
/// Symmetry reports each `(i, j)` with `R(i, j)` but not `R(j, i)`;
/// antisymmetry reports each unordered pair `i < j` related both ways;
/// (meta-)transitivity reports each `(i, j, k)` breaking the implication.
pub fn check_property(kg: &KnowledgeGraph, spec: &PropertySpec) -> Result<Vec<Violation>> {
    let resolved = spec
        .relations
        .iter()
        .map(|r| r.resolve(kg))
        .collect::<Result<Vec<_>>>()?;
    let expected = match spec.kind {
        PropertyKind::MetaTransitive => 3,
        _ => 1,
    };
    if resolved.len() != expected {
        return Err(Error::InvalidParameter(format!(
            "{} takes {expected} relation(s), got {}",
            spec.kind.as_str(),
            resolved.len()
        )));
    }
    let n = kg.n();
    let rel = |which: &[usize], i: usize, j: usize| which.iter().any(|&k| kg.holds(k, i, j));
    let mut out = Vec::new();
    match spec.kind {
        PropertyKind::Symmetric => {
            let r = &resolved[0];
            for i in 0..n {
                for j in 0..n {
                    if rel(r, i, j) && !rel(r, j, i) {
                        out.push(Violation::Pair(i, j));
                    }
                }
            }
        }
        PropertyKind::Antisymmetric => {
            let r = &resolved[0];
            for i in 0..n {
                for j in i + 1..n {
                    if rel(r, i, j) && rel(r, j, i) {
                        out.push(Violation::Pair(i, j));
                    }
                }
            }
        }
        PropertyKind::Transitive | PropertyKind::MetaTransitive => {
            let (r1, r2, r3) = if spec.kind == PropertyKind::Transitive {
                (&resolved[0], &resolved[0], &resolved[0])
            } else {
                (&resolved[0], &resolved[1], &resolved[2])
            };
            for i in 0..n {
                for j in 0..n {
                    if !rel(r1, i, j) {
                        continue;
                    }
                    for k in 0..n {
                        if rel(r2, j, k) && !rel(r3, i, k) {
                            out.push(Violation::Triple(i, j, k));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One labeled link-prediction example: does `relation(subject, object)` hold?
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub relation: usize,
    pub subject: usize,
    pub object: usize,
    pub label: bool,
}

/// A random partition of the full triple universe.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleSplit {
    pub train: Vec<Triple>,
    pub test: Vec<Triple>,
    pub seed: u64,
    pub fraction: f64,
}

/// Shuffles all `m * n^2` triples with `seed` and puts the first
/// `round(fraction * total)` in the training set. Both halves come back
/// sorted.
pub fn split_triples(kg: &KnowledgeGraph, fraction: f64, seed: u64) -> Result<TripleSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction {fraction} outside (0, 1)"
        )));
    }
    let mut all = kg.all_triples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    all.shuffle(&mut rng);
    let n_train = libm::round(fraction * all.len() as f64) as usize;
    let mut test = all.split_off(n_train);
    let mut train = all;
    train.sort_unstable();
    test.sort_unstable();
    Ok(TripleSplit {
        train,
        test,
        seed,
        fraction,
    })
}
