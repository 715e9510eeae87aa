//! Finite labeled transition systems.

use thiserror::Error;

/// Name of the distinguished order action.
pub const ORDER_ACTION: &str = "<";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LtsError {
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown proposition `{0}`")]
    UnknownProp(String),
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("an LTS needs at least one state")]
    Empty,
}

/// `T = (S, A, l)` with named states, actions and propositions. States keep
/// their declaration order; that order is the one used for canonical indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lts {
    states: Vec<String>,
    actions: Vec<String>,
    props: Vec<String>,
    /// Row-major `n x n` adjacency per action.
    edges: Vec<Vec<bool>>,
    /// Characteristic vector per proposition.
    labels: Vec<Vec<bool>>,
}

impl Lts {
    pub fn new<S: Into<String>>(states: impl IntoIterator<Item = S>) -> Result<Lts, LtsError> {
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        if states.is_empty() {
            return Err(LtsError::Empty);
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) {
                return Err(LtsError::Duplicate {
                    kind: "state",
                    name: s.clone(),
                });
            }
        }
        Ok(Lts {
            states,
            actions: Vec::new(),
            props: Vec::new(),
            edges: Vec::new(),
            labels: Vec::new(),
        })
    }

    /// `n` states `s0 .. s{n-1}` totally ordered by `<` in declaration order.
    pub fn ordered(n: usize) -> Lts {
        let mut lts = Lts::new((0..n).map(|i| format!("s{i}"))).expect("n > 0");
        lts.add_action(ORDER_ACTION).expect("fresh");
        lts.order_by_declaration();
        lts
    }

    pub fn add_action(&mut self, name: impl Into<String>) -> Result<usize, LtsError> {
        let name = name.into();
        if self.actions.contains(&name) {
            return Err(LtsError::Duplicate {
                kind: "action",
                name,
            });
        }
        self.actions.push(name);
        self.edges.push(vec![false; self.len() * self.len()]);
        Ok(self.actions.len() - 1)
    }

    pub fn add_prop(&mut self, name: impl Into<String>) -> Result<usize, LtsError> {
        let name = name.into();
        if self.props.contains(&name) {
            return Err(LtsError::Duplicate {
                kind: "proposition",
                name,
            });
        }
        self.props.push(name);
        self.labels.push(vec![false; self.len()]);
        Ok(self.props.len() - 1)
    }

    pub fn add_edge(&mut self, from: &str, action: &str, to: &str) -> Result<(), LtsError> {
        let (i, j) = (self.state(from)?, self.state(to)?);
        let a = self.action(action)?;
        self.set_edge(a, i, j, true);
        Ok(())
    }

    pub fn add_label(&mut self, state: &str, prop: &str) -> Result<(), LtsError> {
        let s = self.state(state)?;
        let p = self
            .prop_index(prop)
            .ok_or_else(|| LtsError::UnknownProp(prop.to_string()))?;
        self.labels[p][s] = true;
        Ok(())
    }

    pub fn set_edge(&mut self, action: usize, from: usize, to: usize, present: bool) {
        let n = self.len();
        self.edges[action][from * n + to] = present;
    }

    pub fn set_label(&mut self, prop: usize, state: usize, present: bool) {
        self.labels[prop][state] = present;
    }

    /// Adds `<` edges `s_i < s_j` for all `i < j`, creating the action if needed.
    pub fn order_by_declaration(&mut self) {
        let a = match self.action_index(ORDER_ACTION) {
            Some(a) => a,
            None => self.add_action(ORDER_ACTION).expect("absent"),
        };
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                self.set_edge(a, i, j, true);
            }
        }
    }

    fn state(&self, name: &str) -> Result<usize, LtsError> {
        self.state_index(name)
            .ok_or_else(|| LtsError::UnknownState(name.to_string()))
    }

    fn action(&self, name: &str) -> Result<usize, LtsError> {
        self.action_index(name)
            .ok_or_else(|| LtsError::UnknownAction(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn props(&self) -> &[String] {
        &self.props
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|s| s == name)
    }

    pub fn prop_index(&self, name: &str) -> Option<usize> {
        self.props.iter().position(|s| s == name)
    }

    pub fn has_edge(&self, action: usize, from: usize, to: usize) -> bool {
        self.edges[action][from * self.len() + to]
    }

    pub fn has_label(&self, prop: usize, state: usize) -> bool {
        self.labels[prop][state]
    }

    /// Row-major adjacency matrix of an action.
    pub fn adjacency(&self, action: usize) -> &[bool] {
        &self.edges[action]
    }

    /// Characteristic vector of a proposition.
    pub fn extension(&self, prop: usize) -> &[bool] {
        &self.labels[prop]
    }

    /// All edges `(from, action, to)` by index.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let n = self.len();
        self.edges.iter().enumerate().flat_map(move |(a, m)| {
            m.iter()
                .enumerate()
                .filter(|(_, b)| **b)
                .map(move |(k, _)| (k / n, a, k % n))
        })
    }

    /// Whether `<` exists and is a strict total order (irreflexive, transitive, trichotomous).
    pub fn is_totally_ordered(&self) -> bool {
        self.order_ranks().is_some()
    }

    /// For a strict total order `<`, the rank of every state (0 = least).
    pub fn order_ranks(&self) -> Option<Vec<usize>> {
        let a = self.action_index(ORDER_ACTION)?;
        let n = self.len();
        for i in 0..n {
            if self.has_edge(a, i, i) {
                return None;
            }
            for j in 0..n {
                if i != j && self.has_edge(a, i, j) == self.has_edge(a, j, i) {
                    return None;
                }
                for k in 0..n {
                    if self.has_edge(a, i, j) && self.has_edge(a, j, k) && !self.has_edge(a, i, k) {
                        return None;
                    }
                }
            }
        }
        // In a strict total order the rank is the number of smaller states.
        Some(
            (0..n)
                .map(|j| (0..n).filter(|&i| self.has_edge(a, i, j)).count())
                .collect(),
        )
    }

    /// Whether `<` is exactly the declaration order.
    pub fn order_matches_declaration(&self) -> bool {
        self.order_ranks()
            .is_some_and(|r| r.iter().enumerate().all(|(i, &k)| i == k))
    }
}
