//! The attributed spatial And-Or grammar: node kinds, structure checks and
//! recovery of the parse-tree choices that explain an observed scene.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAMMAR_VERSION: u32 = 1;

/// Label used for the empty address value.
pub const NIL: &str = "nil";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    And,
    Or,
    Set,
    Terminal,
    Address,
}

/// Whether a regular terminal stands on the floor or is carried by furniture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    #[default]
    Furniture,
    Object,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<String>,
    /// Object category of a regular terminal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "is_furniture")]
    pub layer: Layer,
    /// Categories an address terminal may point at; `nil` is implicit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<String>,
}

fn is_furniture(layer: &Layer) -> bool {
    *layer == Layer::Furniture
}

impl NodeSpec {
    pub fn and(children: &[&str]) -> Self {
        Self::nonterminal(NodeKind::And, children)
    }

    pub fn or(children: &[&str]) -> Self {
        Self::nonterminal(NodeKind::Or, children)
    }

    pub fn set(children: &[&str]) -> Self {
        Self::nonterminal(NodeKind::Set, children)
    }

    pub fn terminal(category: &str, layer: Layer) -> Self {
        Self {
            kind: NodeKind::Terminal,
            children: Vec::new(),
            category: Some(category.to_string()),
            layer,
            candidates: Vec::new(),
        }
    }

    pub fn address(candidates: &[&str]) -> Self {
        Self {
            kind: NodeKind::Address,
            children: Vec::new(),
            category: None,
            layer: Layer::Furniture,
            candidates: candidates.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn nonterminal(kind: NodeKind, children: &[&str]) -> Self {
        Self {
            kind,
            children: children.iter().map(|s| s.to_string()).collect(),
            category: None,
            layer: Layer::Furniture,
            candidates: Vec::new(),
        }
    }
}

/// The grammar structure. Each scene type is the id of an And-node reachable
/// from `root`; branch probabilities live in the learned model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grammar {
    pub version: u32,
    pub root: String,
    pub scene_types: Vec<String>,
    pub nodes: BTreeMap<String, NodeSpec>,
}

/// Key of a Set-node child branch in the count tables.
pub fn set_key(set: &str, child: &str) -> String {
    format!("{set}/{child}")
}

/// Or selections and Set counts realised while expanding a parse tree, in
/// expansion order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TreeChoices {
    pub or: Vec<OrChoice>,
    pub set: Vec<SetCount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrChoice {
    pub node: String,
    pub child: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetCount {
    pub node: String,
    pub child: String,
    pub count: usize,
}

impl Grammar {
    pub fn node(&self, id: &str) -> Result<&NodeSpec> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::Grammar(format!("unknown node `{id}`")))
    }

    /// Checks the structural invariants: every referenced node exists, the
    /// parent-child graph is acyclic, non-terminals have children, terminals
    /// carry categories, each category is reached by a single path per scene
    /// type and Set branches expand to exactly one regular terminal.
    pub fn validate(&self) -> Result<()> {
        if self.version != GRAMMAR_VERSION {
            return Err(Error::Grammar(format!(
                "unsupported grammar version {}",
                self.version
            )));
        }
        self.node(&self.root)?;
        for (id, node) in &self.nodes {
            match node.kind {
                NodeKind::And | NodeKind::Or | NodeKind::Set => {
                    if node.children.is_empty() {
                        return Err(Error::Grammar(format!("non-terminal `{id}` has no children")));
                    }
                    for c in &node.children {
                        self.node(c)?;
                    }
                }
                NodeKind::Terminal => {
                    if node.category.as_deref().is_none_or(str::is_empty) {
                        return Err(Error::Grammar(format!("terminal `{id}` has no category")));
                    }
                }
                NodeKind::Address => {}
            }
        }
        let mut state = BTreeMap::new();
        self.check_acyclic(&self.root, &mut state)?;
        for st in &self.scene_types {
            let node = self.node(st)?;
            if node.kind != NodeKind::And {
                return Err(Error::Grammar(format!("scene type `{st}` must be an And-node")));
            }
            self.check_acyclic(st, &mut state)?;
            let mut seen = BTreeSet::new();
            self.check_unique_paths(st, &mut seen)?;
        }
        for (id, node) in &self.nodes {
            if node.kind == NodeKind::Set {
                for c in &node.children {
                    if !self.is_single_instance(c) {
                        return Err(Error::Grammar(format!(
                            "branch `{c}` of set `{id}` must expand to exactly one regular terminal"
                        )));
                    }
                }
            }
            if node.kind == NodeKind::Address {
                for cand in &node.candidates {
                    if self.layer_of(cand) != Some(Layer::Furniture) {
                        return Err(Error::Grammar(format!(
                            "address `{id}` candidate `{cand}` is not a furniture category"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_acyclic(&self, id: &str, state: &mut BTreeMap<String, bool>) -> Result<()> {
        match state.get(id) {
            Some(true) => return Ok(()),
            Some(false) => return Err(Error::Grammar(format!("cycle through `{id}`"))),
            None => {}
        }
        state.insert(id.to_string(), false);
        for c in &self.node(id)?.children {
            self.check_acyclic(c, state)?;
        }
        state.insert(id.to_string(), true);
        Ok(())
    }

    fn check_unique_paths(&self, id: &str, seen: &mut BTreeSet<String>) -> Result<()> {
        let node = self.node(id)?;
        if node.kind == NodeKind::Terminal {
            let cat = node.category.clone().unwrap_or_default();
            if !seen.insert(cat.clone()) {
                return Err(Error::Grammar(format!(
                    "category `{cat}` is reachable by more than one path"
                )));
            }
        }
        for c in &node.children {
            self.check_unique_paths(c, seen)?;
        }
        Ok(())
    }

    /// Whether one expansion of `id` yields exactly one regular terminal.
    fn is_single_instance(&self, id: &str) -> bool {
        let Ok(node) = self.node(id) else {
            return false;
        };
        match node.kind {
            NodeKind::Terminal => true,
            NodeKind::Address | NodeKind::Set => false,
            NodeKind::Or => node.children.iter().all(|c| self.is_single_instance(c)),
            NodeKind::And => {
                let mut regular = 0;
                for c in &node.children {
                    match self.nodes.get(c).map(|n| n.kind) {
                        Some(NodeKind::Address) => {}
                        _ if self.is_single_instance(c) => regular += 1,
                        _ => return false,
                    }
                }
                regular == 1
            }
        }
    }

    /// Categories a node can emit.
    pub fn emits(&self, id: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_emits(id, &mut out);
        out
    }

    fn collect_emits(&self, id: &str, out: &mut BTreeSet<String>) {
        if let Some(node) = self.nodes.get(id) {
            if let Some(cat) = &node.category {
                out.insert(cat.clone());
            }
            for c in &node.children {
                self.collect_emits(c, out);
            }
        }
    }

    /// All regular-terminal categories with their layer, sorted by name.
    pub fn categories(&self) -> BTreeMap<String, Layer> {
        self.nodes
            .values()
            .filter(|n| n.kind == NodeKind::Terminal)
            .filter_map(|n| n.category.clone().map(|c| (c, n.layer)))
            .collect()
    }

    pub fn layer_of(&self, category: &str) -> Option<Layer> {
        self.nodes
            .values()
            .find(|n| n.kind == NodeKind::Terminal && n.category.as_deref() == Some(category))
            .map(|n| n.layer)
    }

    /// The address candidates attached to a category: an Address node that is
    /// a sibling of the category's terminal under an And-node.
    pub fn address_candidates(&self, category: &str) -> Option<&[String]> {
        for node in self.nodes.values() {
            if node.kind != NodeKind::And {
                continue;
            }
            let has_terminal = node.children.iter().any(|c| {
                self.nodes
                    .get(c)
                    .is_some_and(|n| n.kind == NodeKind::Terminal && n.category.as_deref() == Some(category))
            });
            if !has_terminal {
                continue;
            }
            if let Some(addr) = node
                .children
                .iter()
                .filter_map(|c| self.nodes.get(c))
                .find(|n| n.kind == NodeKind::Address)
            {
                return Some(&addr.candidates);
            }
        }
        None
    }

    /// Recovers the parse-tree choices that explain the categories observed in
    /// a scene of type `scene_type`.
    ///
    /// Or-nodes pick the child explaining most observed instances (first child
    /// on ties); Set branches count one unit per observed instance.
    pub fn parse(&self, scene_type: &str, categories: &[String]) -> Result<TreeChoices> {
        if !self.scene_types.iter().any(|s| s == scene_type) {
            return Err(Error::UnknownSceneType(scene_type.to_string()));
        }
        let reachable = self.emits(scene_type);
        let mut bag: BTreeMap<String, usize> = BTreeMap::new();
        for c in categories {
            if !reachable.contains(c) {
                return Err(Error::Grammar(format!(
                    "category `{c}` is not produced by scene type `{scene_type}`"
                )));
            }
            *bag.entry(c.clone()).or_default() += 1;
        }
        let mut choices = TreeChoices::default();
        self.parse_node(scene_type, &bag, &mut choices)?;
        Ok(choices)
    }

    fn parse_node(
        &self,
        id: &str,
        bag: &BTreeMap<String, usize>,
        out: &mut TreeChoices,
    ) -> Result<()> {
        let node = self.node(id)?;
        match node.kind {
            NodeKind::Terminal | NodeKind::Address => Ok(()),
            NodeKind::And => {
                for c in &node.children {
                    let sub = restrict(bag, &self.emits(c));
                    self.parse_node(c, &sub, out)?;
                }
                Ok(())
            }
            NodeKind::Or => {
                let mut best = (0usize, &node.children[0]);
                for c in &node.children {
                    let n: usize = restrict(bag, &self.emits(c)).values().sum();
                    if n > best.0 {
                        best = (n, c);
                    }
                }
                let chosen = best.1;
                out.or.push(OrChoice {
                    node: id.to_string(),
                    child: chosen.clone(),
                });
                let sub = restrict(bag, &self.emits(chosen));
                self.parse_node(chosen, &sub, out)
            }
            NodeKind::Set => {
                for c in &node.children {
                    let sub = restrict(bag, &self.emits(c));
                    let count: usize = sub.values().sum();
                    out.set.push(SetCount {
                        node: id.to_string(),
                        child: c.clone(),
                        count,
                    });
                    for (cat, &n) in &sub {
                        let unit: BTreeMap<String, usize> = [(cat.clone(), 1)].into();
                        for _ in 0..n {
                            self.parse_node(c, &unit, out)?;
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

fn restrict(bag: &BTreeMap<String, usize>, keep: &BTreeSet<String>) -> BTreeMap<String, usize> {
    bag.iter()
        .filter(|(k, _)| keep.contains(*k))
        .map(|(k, v)| (k.clone(), *v))
        .collect()
}

/// Hand-defined grouping relations: an associated furniture category and the
/// core categories it may be grouped with.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupingRules {
    pub version: u32,
    pub rules: BTreeMap<String, Vec<String>>,
}

impl GroupingRules {
    pub fn targets(&self, category: &str) -> &[String] {
        self.rules.get(category).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn validate(&self, grammar: &Grammar) -> Result<()> {
        for (from, targets) in &self.rules {
            for cat in std::iter::once(from).chain(targets) {
                if grammar.layer_of(cat) != Some(Layer::Furniture) {
                    return Err(Error::Grammar(format!(
                        "grouping rule `{from}` references `{cat}`, which is not a furniture category"
                    )));
                }
            }
        }
        Ok(())
    }
}
