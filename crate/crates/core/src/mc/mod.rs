//! Query engine: reachability, safety, deadlock freedom, leads-to and
//! channel locality.

pub mod engine;
pub mod formula;
pub mod trace;

pub use engine::{channel_locality, Explorer, Graph, Options, Outcome};
pub use formula::{parse_formula, parse_query, Query, QueryError, StateFormula};
pub use trace::{parse_trace, Trace, TraceError};

use crate::ta::model::Network;
use crate::ta::semantics::Abstraction;

/// Parses and checks one query.
pub fn check_query(net: &Network, text: &str, options: Options) -> Result<Outcome, QueryError> {
    let query = parse_query(text, net)?;
    Ok(Explorer::new(net, &formulas_of(&query), options).check(&query)?)
}

fn formulas_of(query: &Query) -> Vec<&StateFormula> {
    match query {
        Query::Safety(f) | Query::Reach(f) => vec![f],
        Query::LeadsTo(p, q) => vec![p, q],
        _ => Vec::new(),
    }
}

/// Abstraction used when checking `text`, for trace replay.
pub fn query_abstraction(net: &Network, text: &str) -> Result<Abstraction, QueryError> {
    let query = parse_query(text, net)?;
    Ok(engine::query_abstraction(net, &formulas_of(&query)))
}
