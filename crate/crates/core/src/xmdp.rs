//! The expanded MDP, built lazily.
//!
//! An e-state pairs a world state with the reward specification (and control
//! formula) that is still to be evaluated from that state on. Its reward is
//! what the specification pays at the world state; its successors carry the
//! specification progressed through the world state, so every successor of
//! one `(e-state, action)` pair shares the same progressed specification.
//!
//! E-states are identified by world, reward bits and progressed formulas,
//! not by the formulas they arrived with; the stored arrival formulas are
//! those of the first discovery.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::domain::{Nmrdp, ProbAction};
use crate::error::{Error, Result};
use crate::formula::{render_lossy, Formula, PropId};
use crate::progression::{prog, spec_prog_named, RewardSpec};
use crate::state::WorldState;

pub type EStateId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct EState {
    pub world: WorldState,
    /// Specification to be evaluated at `world`.
    pub spec: RewardSpec,
    /// Control formula to be evaluated at `world`; `true` without control.
    pub control: Formula,
    /// Reward paid at `world`.
    pub immediate_reward: f64,
    /// Per-entry reward bits at `world`, in label order.
    pub rewarded: Vec<bool>,
    /// `spec` progressed through `world`.
    pub next_spec: RewardSpec,
    /// `control` progressed through `world`.
    pub next_control: Formula,
}

impl EState {
    /// Evaluates `spec` and `control` at `world`.
    ///
    /// Fails with [`Error::RewardAbnormality`] when an entry progresses to
    /// false; the error names `world` only.
    pub fn new(nmrdp: &Nmrdp, world: WorldState, spec: RewardSpec, control: Formula) -> Result<EState> {
        let step = spec_prog_named(&world, &spec, Some(nmrdp.table()))?;
        let next_control = prog(false, &world, &control);
        Ok(EState {
            world,
            spec,
            control,
            immediate_reward: step.total_reward,
            rewarded: step.rewarded,
            next_spec: step.next,
            next_control,
        })
    }

    /// False once the control formula is violated at this e-state.
    pub fn control_ok(&self) -> bool {
        self.next_control != Formula::False
    }

    /// Two e-states with equal keys pay the same reward now and progress to
    /// the same specification and control, so they have the same future.
    pub fn key(&self) -> EStateKey {
        EStateKey {
            world: self.world.clone(),
            rewarded: self.rewarded.clone(),
            next_spec: self.next_spec.formulas().cloned().collect(),
            next_control: self.next_control.clone(),
        }
    }
}

/// Interning key: world, reward bits, and the canonical progressed spec
/// formulas (label order) and control formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EStateKey {
    pub world: WorldState,
    pub rewarded: Vec<bool>,
    pub next_spec: Vec<Formula>,
    pub next_control: Formula,
}

/// Dense, append-only interning of e-states.
#[derive(Debug, Default)]
pub struct EStateStore {
    ids: HashMap<EStateKey, EStateId>,
    states: Vec<EState>,
    /// First discovery: predecessor and action index.
    parents: Vec<Option<(EStateId, usize)>>,
}

impl EStateStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `e`, adding it if absent; the flag is true when added.
    pub fn intern(&mut self, e: EState) -> (EStateId, bool) {
        self.intern_from(e, None)
    }

    fn intern_from(&mut self, e: EState, parent: Option<(EStateId, usize)>) -> (EStateId, bool) {
        let key = e.key();
        if let Some(&id) = self.ids.get(&key) {
            return (id, false);
        }
        let id = self.states.len();
        self.ids.insert(key, id);
        self.states.push(e);
        self.parents.push(parent);
        (id, true)
    }

    pub fn lookup(&self, key: &EStateKey) -> Option<EStateId> {
        self.ids.get(key).copied()
    }

    pub fn get(&self, id: EStateId) -> &EState {
        &self.states[id]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[EState] {
        &self.states
    }
}

/// The e-state of the initial world under the full specification.
pub fn initial_estate(nmrdp: &Nmrdp) -> Result<EState> {
    let control = nmrdp.control().cloned().unwrap_or(Formula::True);
    EState::new(nmrdp, nmrdp.initial().clone(), nmrdp.reward().clone(), control).map_err(|e| match e {
        Error::RewardAbnormality { label, state, .. } => Error::RewardAbnormality {
            label,
            state,
            stage: Some(0),
        },
        other => other,
    })
}

/// Actions available in `e`: none once control is violated.
pub fn estate_actions<'m>(nmrdp: &'m Nmrdp, e: &EState) -> Vec<&'m ProbAction> {
    if e.control_ok() {
        nmrdp.applicable(&e.world)
    } else {
        Vec::new()
    }
}

/// Lazily expanded XMDP over a borrowed model.
///
/// E-state 0 is the initial e-state. Actions are referred to by their index
/// in [`Nmrdp::actions`].
type Distribution = Vec<(EStateId, f64)>;

#[derive(Debug)]
pub struct Xmdp<'m> {
    nmrdp: &'m Nmrdp,
    store: EStateStore,
    budget: usize,
    /// Per e-state: available action indices and their cached expansions.
    actions: Vec<Vec<usize>>,
    expansions: Vec<Vec<Option<Distribution>>>,
}

impl<'m> Xmdp<'m> {
    /// Interns the initial e-state. No node budget.
    pub fn new(nmrdp: &'m Nmrdp) -> Result<Self> {
        Self::with_budget(nmrdp, usize::MAX)
    }

    pub fn with_budget(nmrdp: &'m Nmrdp, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Invariant("node budget must be at least 1".into()));
        }
        let mut x = Xmdp {
            nmrdp,
            store: EStateStore::new(),
            budget,
            actions: Vec::new(),
            expansions: Vec::new(),
        };
        let e = initial_estate(nmrdp)?;
        x.add(e, None);
        Ok(x)
    }

    fn add(&mut self, e: EState, parent: Option<(EStateId, usize)>) -> EStateId {
        let acts: Vec<usize> = if e.control_ok() {
            (0..self.nmrdp.actions().len())
                .filter(|&i| self.nmrdp.actions()[i].is_applicable(&e.world))
                .collect()
        } else {
            Vec::new()
        };
        let (id, added) = self.store.intern_from(e, parent);
        if added {
            self.expansions.push(vec![None; acts.len()]);
            self.actions.push(acts);
        }
        id
    }

    pub fn nmrdp(&self) -> &'m Nmrdp {
        self.nmrdp
    }

    pub fn store(&self) -> &EStateStore {
        &self.store
    }

    pub fn initial(&self) -> EStateId {
        0
    }

    pub fn estate(&self, id: EStateId) -> &EState {
        self.store.get(id)
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// Indices of the actions available in `id`, in declaration order.
    pub fn actions(&self, id: EStateId) -> &[usize] {
        &self.actions[id]
    }

    pub fn action_name(&self, action: usize) -> &'m str {
        &self.nmrdp.actions()[action].name
    }

    /// Cached successors of `(id, action)`, if already expanded.
    pub fn successors(&self, id: EStateId, action: usize) -> Option<&[(EStateId, f64)]> {
        let slot = self.actions[id].iter().position(|&a| a == action)?;
        self.expansions[id][slot].as_deref()
    }

    pub fn is_fully_expanded(&self, id: EStateId) -> bool {
        self.expansions[id].iter().all(Option::is_some)
    }

    /// Successors of `(id, action)`, interning new e-states on first call.
    ///
    /// Fails without changing the store when the new e-states would exceed
    /// the node budget.
    pub fn expand(&mut self, id: EStateId, action: usize) -> Result<&[(EStateId, f64)]> {
        let slot = self.actions[id].iter().position(|&a| a == action).ok_or_else(|| {
            let e = self.store.get(id);
            Error::NotApplicable {
                action: self.action_name(action).to_string(),
                state: e.world.display(self.nmrdp.table()).to_string(),
            }
        })?;
        if self.expansions[id][slot].is_none() {
            let succ = self.compute(id, action)?;
            self.expansions[id][slot] = Some(succ);
        }
        Ok(self.expansions[id][slot].as_deref().expect("just filled"))
    }

    fn compute(&mut self, id: EStateId, action: usize) -> Result<Vec<(EStateId, f64)>> {
        let nmrdp = self.nmrdp;
        let e = self.store.get(id);
        let dist = nmrdp.successors(&e.world, &nmrdp.actions()[action])?;
        let mut resolved = Vec::with_capacity(dist.len());
        let mut fresh = 0;
        for (w, p) in dist {
            let e = self.store.get(id);
            let built = EState::new(nmrdp, w, e.next_spec.clone(), e.next_control.clone())
                .map_err(|err| self.name_path(err, id, action))?;
            let known = self.store.lookup(&built.key());
            if known.is_none() {
                fresh += 1;
            }
            resolved.push((built, known, p));
        }
        if self.store.len() + fresh > self.budget {
            return Err(Error::BudgetExceeded {
                budget: self.budget,
                nodes: self.store.len(),
            });
        }
        Ok(resolved
            .into_iter()
            .map(|(built, known, p)| (known.unwrap_or_else(|| self.add(built, Some((id, action)))), p))
            .collect())
    }

    /// Rewrites an abnormality raised at a successor of `(id, action)` so it
    /// names the discovery path and its 0-based stage.
    fn name_path(&self, err: Error, id: EStateId, action: usize) -> Error {
        let Error::RewardAbnormality { label, state, .. } = err else {
            return err;
        };
        let table = self.nmrdp.table();
        let mut steps = vec![(Some(action), state)];
        let mut cur = Some(id);
        while let Some(c) = cur {
            let parent = self.store.parents[c];
            steps.push((
                parent.map(|(_, a)| a),
                self.store.get(c).world.display(table).to_string(),
            ));
            cur = parent.map(|(p, _)| p);
        }
        steps.reverse();
        let stage = steps.len() - 1;
        let mut path = String::new();
        for (a, w) in steps {
            if let Some(a) = a.filter(|_| !path.is_empty()) {
                let _ = write!(path, " -{}-> ", self.action_name(a));
            }
            path.push_str(&w);
        }
        Error::RewardAbnormality {
            label,
            state: path,
            stage: Some(stage),
        }
    }

    /// Expands every reachable `(e-state, action)` pair breadth first.
    ///
    /// On [`Error::BudgetExceeded`] the partial graph stays available.
    pub fn expand_all(&mut self) -> Result<()> {
        let mut i = 0;
        while i < self.store.len() {
            for a in self.actions[i].clone() {
                self.expand(i, a)?;
            }
            i += 1;
        }
        Ok(())
    }

    /// Snapshot of the expanded part.
    pub fn graph(&self) -> XmdpGraph {
        let table = self.nmrdp.table();
        let nodes = self
            .store
            .states()
            .iter()
            .enumerate()
            .map(|(id, e)| GraphNode {
                id,
                world: e.world.display(table).to_string(),
                reward: e.immediate_reward,
                control_ok: e.control_ok(),
            })
            .collect();
        let mut edges = Vec::new();
        for (id, acts) in self.actions.iter().enumerate() {
            for (slot, &a) in acts.iter().enumerate() {
                if let Some(succ) = &self.expansions[id][slot] {
                    for &(dst, prob) in succ {
                        edges.push(GraphEdge {
                            src: id,
                            action: self.action_name(a).to_string(),
                            dst,
                            prob,
                        });
                    }
                }
            }
        }
        XmdpGraph { nodes, edges }
    }

    /// Runs the blind-minimality audit over every interned e-state.
    pub fn audit(&self, horizon: usize, limits: &AuditLimits) -> Result<AuditReport> {
        audit_blind_minimality(self.nmrdp, self.store.states(), horizon, limits)
    }
}

/// Builds the whole reachable XMDP.
pub fn reachable_xmdp(nmrdp: &Nmrdp, budget: usize) -> Result<Xmdp<'_>> {
    let mut x = Xmdp::with_budget(nmrdp, budget)?;
    x.expand_all()?;
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub id: EStateId,
    pub world: String,
    pub reward: f64,
    pub control_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub src: EStateId,
    pub action: String,
    pub dst: EStateId,
    pub prob: f64,
}

/// Explicit node and edge lists.
#[derive(Debug, Clone, PartialEq)]
pub struct XmdpGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl XmdpGraph {
    /// Distinct `(src, dst)` pairs, ignoring actions.
    pub fn transition_count(&self) -> usize {
        self.edges.iter().map(|e| (e.src, e.dst)).collect::<BTreeSet<_>>().len()
    }

    /// Line format: `node <id> <world> <reward> <control-ok>` then
    /// `edge <src> <action> <dst> <prob>`.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let _ = writeln!(out, "node {} {} {} {}", n.id, n.world, n.reward, n.control_ok);
        }
        for e in &self.edges {
            let _ = writeln!(out, "edge {} {} {} {}", e.src, e.action, e.dst, e.prob);
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AuditLimits {
    /// Largest number of futures per pair, `|S|^(H-1)` over the relevant
    /// propositions.
    pub max_futures: u128,
}

impl Default for AuditLimits {
    fn default() -> Self {
        AuditLimits { max_futures: 1 << 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distinction {
    pub a: EStateId,
    pub b: EStateId,
    /// World sequence starting at the shared world state.
    pub future: Vec<WorldState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub horizon: usize,
    pub pairs: usize,
    pub distinguished: Vec<Distinction>,
    /// Pairs with no distinguishing future up to the horizon.
    pub mergeable: Vec<(EStateId, EStateId)>,
}

impl AuditReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "{} mergeable pairs ({} pairs checked, horizon {})\n",
            self.mergeable.len(),
            self.pairs,
            self.horizon
        );
        for (a, b) in &self.mergeable {
            let _ = writeln!(out, "mergeable {a} {b}");
        }
        out
    }
}

/// Searches, for each pair of e-states over the same world, for a world
/// sequence of length at most `horizon` on which their rewards (or control
/// verdicts) differ. Any sequence counts, feasible or not.
pub fn audit_blind_minimality(
    nmrdp: &Nmrdp,
    estates: &[EState],
    horizon: usize,
    limits: &AuditLimits,
) -> Result<AuditReport> {
    let mut by_world: BTreeMap<&WorldState, Vec<EStateId>> = BTreeMap::new();
    for (id, e) in estates.iter().enumerate() {
        by_world.entry(&e.world).or_default().push(id);
    }
    let mut report = AuditReport {
        horizon,
        pairs: 0,
        distinguished: Vec::new(),
        mergeable: Vec::new(),
    };
    for ids in by_world.values() {
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                report.pairs += 1;
                match distinguish(nmrdp, &estates[a], &estates[b], horizon, limits)? {
                    Some(future) => report.distinguished.push(Distinction { a, b, future }),
                    None => report.mergeable.push((a, b)),
                }
            }
        }
    }
    Ok(report)
}

fn distinguish(
    nmrdp: &Nmrdp,
    a: &EState,
    b: &EState,
    horizon: usize,
    limits: &AuditLimits,
) -> Result<Option<Vec<WorldState>>> {
    if horizon == 0 {
        return Ok(None);
    }
    let mut props: BTreeSet<PropId> = BTreeSet::new();
    for f in a.spec.formulas().chain(b.spec.formulas()).chain([&a.control, &b.control]) {
        props.extend(f.propositions());
    }
    let props: Vec<PropId> = props.into_iter().collect();
    let needed = 1u128
        .checked_shl(props.len() as u32)
        .and_then(|n| n.checked_pow(horizon as u32 - 1))
        .unwrap_or(u128::MAX);
    if needed > limits.max_futures {
        return Err(Error::Capacity {
            what: "audit futures",
            needed,
            limit: limits.max_futures,
        });
    }
    let mut path = vec![a.world.clone()];
    let found = search(
        nmrdp,
        &props,
        (&a.spec, &a.control),
        (&b.spec, &b.control),
        &mut path,
        horizon,
    );
    Ok(found.then_some(path))
}

/// One side of the audit replay: the step at the last world of `path`, or
/// `None` on abnormality.
fn step(nmrdp: &Nmrdp, w: &WorldState, spec: &RewardSpec, control: &Formula) -> Option<(f64, RewardSpec, Formula)> {
    let s = spec_prog_named(w, spec, Some(nmrdp.table())).ok()?;
    Some((s.total_reward, s.next, prog(false, w, control)))
}

fn search(
    nmrdp: &Nmrdp,
    props: &[PropId],
    a: (&RewardSpec, &Formula),
    b: (&RewardSpec, &Formula),
    path: &mut Vec<WorldState>,
    horizon: usize,
) -> bool {
    let w = path.last().expect("non-empty").clone();
    let (sa, sb) = match (step(nmrdp, &w, a.0, a.1), step(nmrdp, &w, b.0, b.1)) {
        (None, None) => return false,
        (Some(_), None) | (None, Some(_)) => return true,
        (Some(x), Some(y)) => (x, y),
    };
    let violated = |c: &Formula| *c == Formula::False;
    if sa.0 != sb.0 || violated(&sa.2) != violated(&sb.2) {
        return true;
    }
    if (sa.1 == sb.1 && sa.2 == sb.2) || path.len() >= horizon {
        return false;
    }
    // Both controls violated: neither continues.
    if violated(&sa.2) {
        return false;
    }
    for bits in 0u64..(1 << props.len()) {
        let mut next = w.clone();
        for (j, &p) in props.iter().enumerate() {
            if bits & (1 << j) != 0 {
                next.insert(p);
            } else {
                next.remove(p);
            }
        }
        path.push(next);
        if search(nmrdp, props, (&sa.1, &sa.2), (&sb.1, &sb.2), path, horizon) {
            return true;
        }
        path.pop();
    }
    false
}

/// Human-readable description of an e-state.
pub fn describe_estate(nmrdp: &Nmrdp, e: &EState) -> String {
    let table = nmrdp.table();
    let spec: Vec<String> = e
        .spec
        .entries()
        .iter()
        .map(|x| format!("{}: {}", x.label, render_lossy(&x.formula, table)))
        .collect();
    format!(
        "{} [{}] control {} reward {}",
        e.world.display(table),
        spec.join("; "),
        render_lossy(&e.control, table),
        e.immediate_reward
    )
}
