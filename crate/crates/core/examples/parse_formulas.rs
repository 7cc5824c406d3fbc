//! Parses a few $FLTL formulas, shows their NNF and canonical forms, and the
//! bounded-operator sugar they expand to.

use nmrdp::{parse, render, PropositionTable};

fn main() -> nmrdp::Result<()> {
    let mut table = PropositionTable::new();
    let inputs = [
        "G (p -> $)",
        "~p U (p & $)",
        "~(p & (q | ~r))",
        "G (c -> A<=2 (p -> $))",
        "F<=3 q & (true | p) & q",
        "$ U ~p",
    ];
    for text in inputs {
        let f = parse(text, &mut table)?;
        println!("{text}");
        println!("  parsed    {}", render(&f, &table)?);
        println!("  canonical {}", render(&f.canonical(), &table)?);
        println!("  size {} depth {}", f.len(), f.depth());
    }

    // Negation is only available on propositional subformulas.
    match parse("~(X p)", &mut table) {
        Err(e) => println!("~(X p): {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
