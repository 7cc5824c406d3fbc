//! $FLTL formulae in negation normal form.
//!
//! The language has literals (`p`, `~p`, `true`, `false` and the reward
//! constant `$`), conjunction, disjunction, next and weak until. Negation only
//! ever sits on atoms, and there is no negated `$`.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::state::WorldState;

/// Dense proposition identifier.
pub type PropId = u32;

/// Bidirectional map between proposition names and dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropositionTable {
    names: Vec<String>,
    ids: HashMap<String, PropId>,
}

impl PropositionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut t = Self::new();
        for n in names {
            t.intern(n.as_ref());
        }
        t
    }

    /// Returns the id of `name`, appending it if absent.
    pub fn intern(&mut self, name: &str) -> PropId {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as PropId;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<PropId> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: PropId) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

/// An $FLTL formula in negation normal form.
///
/// The derived ordering (constructor rank, then proposition id, then
/// children) is the total order used to sort operands in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Dollar,
    Atom(PropId),
    NegAtom(PropId),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Next(Box<Formula>),
    WeakUntil(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn until(lhs: Formula, rhs: Formula) -> Self {
        Formula::WeakUntil(Box::new(lhs), Box::new(rhs))
    }

    /// `G f`, i.e. `f U false`.
    pub fn always(f: Formula) -> Self {
        Formula::until(f, Formula::False)
    }

    /// `k` nested applications of next.
    pub fn next_n(k: usize, f: Formula) -> Self {
        (0..k).fold(f, |acc, _| Formula::next(acc))
    }

    /// Conjunction of `ops`; a single operand is returned unwrapped and an
    /// empty list yields `true`.
    pub fn and(mut ops: Vec<Formula>) -> Self {
        match ops.len() {
            0 => Formula::True,
            1 => ops.pop().unwrap(),
            _ => Formula::And(ops),
        }
    }

    /// Disjunction of `ops`; a single operand is returned unwrapped and an
    /// empty list yields `false`.
    pub fn or(mut ops: Vec<Formula>) -> Self {
        match ops.len() {
            0 => Formula::False,
            1 => ops.pop().unwrap(),
            _ => Formula::Or(ops),
        }
    }

    /// Number of nodes in the syntax tree.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        match self {
            Formula::True
            | Formula::False
            | Formula::Dollar
            | Formula::Atom(_)
            | Formula::NegAtom(_) => 1,
            Formula::And(ops) | Formula::Or(ops) => 1 + ops.iter().map(Formula::len).sum::<usize>(),
            Formula::Next(f) => 1 + f.len(),
            Formula::WeakUntil(a, b) => 1 + a.len() + b.len(),
        }
    }

    /// Height of the syntax tree; literals have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Formula::True
            | Formula::False
            | Formula::Dollar
            | Formula::Atom(_)
            | Formula::NegAtom(_) => 1,
            Formula::And(ops) | Formula::Or(ops) => {
                1 + ops.iter().map(Formula::depth).max().unwrap_or(0)
            }
            Formula::Next(f) => 1 + f.depth(),
            Formula::WeakUntil(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// True iff `$` does not occur.
    pub fn is_dollar_free(&self) -> bool {
        match self {
            Formula::Dollar => false,
            Formula::True | Formula::False | Formula::Atom(_) | Formula::NegAtom(_) => true,
            Formula::And(ops) | Formula::Or(ops) => ops.iter().all(Formula::is_dollar_free),
            Formula::Next(f) => f.is_dollar_free(),
            Formula::WeakUntil(a, b) => a.is_dollar_free() && b.is_dollar_free(),
        }
    }

    /// True iff the formula has neither `$` nor temporal operators.
    pub fn is_propositional(&self) -> bool {
        match self {
            Formula::Dollar | Formula::Next(_) | Formula::WeakUntil(..) => false,
            Formula::True | Formula::False | Formula::Atom(_) | Formula::NegAtom(_) => true,
            Formula::And(ops) | Formula::Or(ops) => ops.iter().all(Formula::is_propositional),
        }
    }

    /// Proposition ids mentioned by the formula.
    pub fn propositions(&self) -> BTreeSet<PropId> {
        let mut out = BTreeSet::new();
        self.collect_props(&mut out);
        out
    }

    fn collect_props(&self, out: &mut BTreeSet<PropId>) {
        match self {
            Formula::Atom(p) | Formula::NegAtom(p) => {
                out.insert(*p);
            }
            Formula::True | Formula::False | Formula::Dollar => {}
            Formula::And(ops) | Formula::Or(ops) => ops.iter().for_each(|f| f.collect_props(out)),
            Formula::Next(f) => f.collect_props(out),
            Formula::WeakUntil(a, b) => {
                a.collect_props(out);
                b.collect_props(out);
            }
        }
    }

    /// Evaluates a propositional formula in a single state.
    ///
    /// Returns `None` if the formula mentions `$` or a temporal operator.
    pub fn eval_propositional(&self, s: &WorldState) -> Option<bool> {
        Some(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(p) => s.contains(*p),
            Formula::NegAtom(p) => !s.contains(*p),
            Formula::And(ops) => {
                let mut all = true;
                for f in ops {
                    all &= f.eval_propositional(s)?;
                }
                all
            }
            Formula::Or(ops) => {
                let mut any = false;
                for f in ops {
                    any |= f.eval_propositional(s)?;
                }
                any
            }
            Formula::Dollar | Formula::Next(_) | Formula::WeakUntil(..) => return None,
        })
    }

    /// The NNF of `~self`, if one exists.
    ///
    /// Negation is pushed through the boolean connectives by De Morgan and
    /// stops at atoms. It cannot cross `$`, next or weak until.
    pub fn negate(&self) -> Result<Formula> {
        Ok(match self {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Atom(p) => Formula::NegAtom(*p),
            Formula::NegAtom(p) => Formula::Atom(*p),
            Formula::And(ops) => Formula::Or(ops.iter().map(Formula::negate).collect::<Result<_>>()?),
            Formula::Or(ops) => Formula::And(ops.iter().map(Formula::negate).collect::<Result<_>>()?),
            Formula::Dollar => return Err(Error::Nnf { construct: "$" }),
            Formula::Next(_) => return Err(Error::Nnf { construct: "X" }),
            Formula::WeakUntil(..) => return Err(Error::Nnf { construct: "U" }),
        })
    }

    /// Canonical form, see [`canonicalize`].
    pub fn canonical(&self) -> Formula {
        canonicalize(self)
    }

    pub fn render(&self, table: &PropositionTable) -> Result<String> {
        render(self, table)
    }
}

/// Simplifies `f` to a canonical, trace-equivalent form.
///
/// Children are canonicalized first. Nested conjunctions and disjunctions are
/// flattened, operands are sorted and deduplicated, `true`/`false` are
/// absorbed, complementary literals collapse the connective, and unit
/// connectives are unwrapped. Weak until and next drop trivial operands
/// (`f U true`, `true U f`, `X true` are `true`; `false U f` is `f`).
/// `X false` is kept: on a finite trace it holds at the last stage.
pub fn canonicalize(f: &Formula) -> Formula {
    match f {
        Formula::True
        | Formula::False
        | Formula::Dollar
        | Formula::Atom(_)
        | Formula::NegAtom(_) => f.clone(),
        Formula::And(ops) => canonical_junction(ops, true),
        Formula::Or(ops) => canonical_junction(ops, false),
        Formula::Next(g) => match canonicalize(g) {
            Formula::True => Formula::True,
            g => Formula::next(g),
        },
        Formula::WeakUntil(a, b) => {
            let a = canonicalize(a);
            let b = canonicalize(b);
            match (&a, &b) {
                (_, Formula::True) | (Formula::True, _) => Formula::True,
                (Formula::False, _) => b,
                _ => Formula::until(a, b),
            }
        }
    }
}

fn canonical_junction(ops: &[Formula], conj: bool) -> Formula {
    // `unit` is the identity element, `zero` the absorbing one.
    let (unit, zero) = if conj {
        (Formula::True, Formula::False)
    } else {
        (Formula::False, Formula::True)
    };
    let mut flat = Vec::with_capacity(ops.len());
    for op in ops {
        match canonicalize(op) {
            Formula::And(inner) if conj => flat.extend(inner),
            Formula::Or(inner) if !conj => flat.extend(inner),
            c if c == zero => return zero,
            c if c == unit => {}
            c => flat.push(c),
        }
    }
    flat.sort();
    flat.dedup();
    // Complementary literals: sorted order puts every Atom before every NegAtom.
    let atoms: BTreeSet<PropId> = flat
        .iter()
        .filter_map(|f| match f {
            Formula::Atom(p) => Some(*p),
            _ => None,
        })
        .collect();
    if flat
        .iter()
        .any(|f| matches!(f, Formula::NegAtom(p) if atoms.contains(p)))
    {
        return zero;
    }
    match flat.len() {
        0 => unit,
        1 => flat.pop().unwrap(),
        _ if conj => Formula::And(flat),
        _ => Formula::Or(flat),
    }
}

/// Renders `f` in the concrete grammar accepted by [`crate::parser::parse`].
///
/// Compound operands of binary connectives are parenthesized, so parsing the
/// output yields a structurally identical formula.
pub fn render(f: &Formula, table: &PropositionTable) -> Result<String> {
    let mut out = String::new();
    render_into(f, table, &mut out)?;
    Ok(out)
}

fn render_into(f: &Formula, table: &PropositionTable, out: &mut String) -> Result<()> {
    let name = |p: PropId| {
        table
            .name(p)
            .ok_or_else(|| Error::UnknownProposition(format!("#{p}")))
    };
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Dollar => out.push('$'),
        Formula::Atom(p) => out.push_str(name(*p)?),
        Formula::NegAtom(p) => {
            out.push('~');
            out.push_str(name(*p)?);
        }
        Formula::And(ops) | Formula::Or(ops) => {
            let sep = if matches!(f, Formula::And(_)) { " & " } else { " | " };
            for (i, op) in ops.iter().enumerate() {
                if i > 0 {
                    out.push_str(sep);
                }
                render_operand(op, table, out)?;
            }
        }
        Formula::Next(g) => {
            out.push_str("X ");
            render_operand(g, table, out)?;
        }
        Formula::WeakUntil(a, b) => {
            render_operand(a, table, out)?;
            out.push_str(" U ");
            render_operand(b, table, out)?;
        }
    }
    Ok(())
}

fn render_operand(f: &Formula, table: &PropositionTable, out: &mut String) -> Result<()> {
    if matches!(f, Formula::And(_) | Formula::Or(_) | Formula::WeakUntil(..)) {
        out.push('(');
        render_into(f, table, out)?;
        out.push(')');
        Ok(())
    } else {
        render_into(f, table, out)
    }
}

/// Renders `f` with `#id` placeholders for propositions missing from `table`.
pub fn render_lossy(f: &Formula, table: &PropositionTable) -> String {
    let mut t = table.clone();
    for p in f.propositions() {
        while t.len() <= p as usize {
            let n = t.len();
            t.intern(&format!("#{n}"));
        }
    }
    render(f, &t).expect("table covers every proposition")
}

#[cfg(test)]
mod tests {
    use super::*;
    use Formula::*;

    fn and(v: Vec<Formula>) -> Formula {
        And(v)
    }
    fn or(v: Vec<Formula>) -> Formula {
        Or(v)
    }

    #[test]
    fn canonical_identity_element() {
        assert_eq!(canonicalize(&and(vec![True, Atom(0)])), Atom(0));
    }

    #[test]
    fn canonical_dedup_and_absorb() {
        assert_eq!(canonicalize(&or(vec![Atom(0), Atom(0), False])), Atom(0));
        assert_eq!(canonicalize(&or(vec![Atom(0), True])), True);
        assert_eq!(canonicalize(&and(vec![Atom(0), False])), False);
    }

    #[test]
    fn canonical_sorts_nested_operands() {
        // p = 0, q = 1
        let f = or(vec![and(vec![Atom(1), Atom(0)]), and(vec![Atom(0), Atom(1)])]);
        assert_eq!(canonicalize(&f), and(vec![Atom(0), Atom(1)]));
    }

    #[test]
    fn canonical_flattens() {
        let f = and(vec![Atom(2), and(vec![Atom(1), and(vec![Atom(0), Dollar])])]);
        assert_eq!(canonicalize(&f), and(vec![Dollar, Atom(0), Atom(1), Atom(2)]));
    }

    #[test]
    fn canonical_complementary_literals() {
        assert_eq!(canonicalize(&and(vec![Atom(0), NegAtom(0), Dollar])), False);
        assert_eq!(canonicalize(&or(vec![NegAtom(3), Atom(3)])), True);
    }

    #[test]
    fn canonical_temporal_rules() {
        assert_eq!(canonicalize(&Formula::next(True)), True);
        assert_eq!(canonicalize(&Formula::next(False)), Formula::next(False));
        assert_eq!(canonicalize(&Formula::until(Atom(0), True)), True);
        assert_eq!(canonicalize(&Formula::until(True, Dollar)), True);
        assert_eq!(canonicalize(&Formula::until(False, Dollar)), Dollar);
        let g = Formula::always(Atom(0));
        assert_eq!(canonicalize(&g), g);
    }

    #[test]
    fn canonical_is_idempotent_on_samples() {
        let f = and(vec![
            or(vec![Formula::until(False, and(vec![Atom(1), Atom(0)])), Atom(2)]),
            and(vec![Formula::next(or(vec![True, Dollar])), Atom(0)]),
        ]);
        let c = canonicalize(&f);
        assert_eq!(canonicalize(&c), c);
    }

    #[test]
    fn dollar_free() {
        assert!(!Dollar.is_dollar_free());
        assert!(Formula::always(Atom(0)).is_dollar_free());
        assert!(!and(vec![Atom(0), or(vec![Dollar, Atom(1)])]).is_dollar_free());
    }

    #[test]
    fn negation_stops_at_temporal_operators() {
        assert_eq!(Formula::next(Atom(0)).negate(), Err(Error::Nnf { construct: "X" }));
        assert_eq!(Dollar.negate(), Err(Error::Nnf { construct: "$" }));
        assert_eq!(
            and(vec![Atom(0), NegAtom(1)]).negate().unwrap(),
            or(vec![NegAtom(0), Atom(1)])
        );
    }

    #[test]
    fn render_examples() {
        let t = PropositionTable::from_names(["p"]);
        assert_eq!(render(&Dollar, &t).unwrap(), "$");
        let f = Formula::until(NegAtom(0), and(vec![Atom(0), Dollar]));
        assert_eq!(render(&f, &t).unwrap(), "~p U (p & $)");
        assert_eq!(render(&Formula::next_n(2, Atom(0)), &t).unwrap(), "X X p");
        assert_eq!(render(&Atom(4), &t), Err(Error::UnknownProposition("#4".into())));
    }

    #[test]
    fn size_and_depth() {
        let f = Formula::until(NegAtom(0), and(vec![Atom(0), Dollar]));
        assert_eq!(f.len(), 5);
        assert_eq!(f.depth(), 3);
    }
}
