//! Built-in regulatory topologies.
//!
//! The synthetic classes (LI, LL, CY, BF, BFC, TF) follow the usual
//! trajectory shapes: chains, a repressive cycle, and branch points built
//! from mutual repression. The curated names (mCAD, VSC, HSC, GSD) are
//! stand-ins with the matching gene count and a comparable edge density;
//! they are not the published Boolean models of those systems.
//!
//! Edge lists below are 1-based: `(source, target, '+' | '-')`.

use super::{Combine, NetworkSpec};
use crate::error::{GrnError, Result};
use crate::metrics::Sign;

pub const BUILTIN_NAMES: &[&str] = &[
    "LI", "LL", "CY", "BF", "BFC", "TF", "mCAD", "VSC", "HSC", "GSD",
];

const CY: &[(usize, usize, char)] = &[
    (1, 2, '+'),
    (2, 3, '+'),
    (3, 4, '+'),
    (4, 5, '+'),
    (5, 6, '+'),
    (6, 1, '-'),
];

const BF: &[(usize, usize, char)] = &[
    (1, 2, '+'),
    (2, 3, '+'),
    (2, 4, '+'),
    (3, 4, '-'),
    (4, 3, '-'),
    (3, 5, '+'),
    (4, 6, '+'),
    (6, 7, '+'),
];

const BFC: &[(usize, usize, char)] = &[
    (1, 2, '+'),
    (2, 3, '+'),
    (2, 4, '+'),
    (3, 4, '-'),
    (4, 3, '-'),
    (3, 5, '+'),
    (4, 6, '+'),
    (5, 7, '+'),
    (6, 7, '+'),
    (7, 8, '+'),
    (8, 9, '+'),
    (9, 10, '+'),
];

const TF: &[(usize, usize, char)] = &[
    (1, 2, '+'),
    (2, 3, '+'),
    (2, 4, '+'),
    (2, 5, '+'),
    (3, 4, '-'),
    (3, 5, '-'),
    (4, 3, '-'),
    (4, 5, '-'),
    (5, 3, '-'),
    (5, 4, '-'),
    (3, 6, '+'),
    (4, 7, '+'),
    (5, 8, '+'),
];

const MCAD: &[(usize, usize, char)] = &[
    (1, 2, '-'),
    (2, 1, '-'),
    (1, 3, '+'),
    (3, 2, '-'),
    (2, 4, '+'),
    (4, 3, '-'),
    (3, 5, '+'),
    (4, 5, '-'),
];

const VSC: &[(usize, usize, char)] = &[
    (1, 2, '-'),
    (2, 1, '-'),
    (1, 3, '+'),
    (2, 4, '+'),
    (3, 4, '-'),
    (4, 3, '-'),
    (3, 5, '+'),
    (4, 6, '+'),
    (5, 6, '-'),
    (6, 5, '-'),
    (5, 7, '+'),
    (6, 8, '+'),
    (7, 8, '-'),
    (8, 7, '-'),
];

const HSC: &[(usize, usize, char)] = &[
    (1, 2, '+'),
    (2, 3, '+'),
    (2, 4, '+'),
    (3, 4, '-'),
    (4, 3, '-'),
    (3, 5, '+'),
    (4, 6, '+'),
    (5, 7, '+'),
    (6, 8, '+'),
    (7, 8, '-'),
    (8, 7, '-'),
    (7, 9, '+'),
    (8, 10, '+'),
    (9, 11, '+'),
    (10, 11, '-'),
];

const GSD: &[(usize, usize, char)] = &[
    (1, 2, '+'),
    (2, 3, '+'),
    (2, 4, '+'),
    (3, 4, '-'),
    (4, 3, '-'),
    (3, 5, '+'),
    (4, 6, '+'),
    (5, 7, '+'),
    (6, 8, '+'),
    (7, 9, '+'),
    (8, 10, '+'),
    (9, 10, '-'),
    (10, 9, '-'),
    (9, 11, '+'),
    (10, 12, '+'),
    (11, 13, '+'),
    (12, 14, '+'),
    (13, 15, '+'),
    (14, 16, '+'),
    (15, 17, '+'),
    (16, 18, '+'),
    (17, 19, '+'),
    (18, 19, '-'),
];

fn chain_edges(n: usize) -> Vec<(usize, usize, char)> {
    (1..n).map(|i| (i, i + 1, '+')).collect()
}

fn build(n: usize, edges: &[(usize, usize, char)], or_genes: &[usize]) -> Result<NetworkSpec> {
    let genes = (1..=n).map(|i| format!("g{i}")).collect();
    let edges = edges
        .iter()
        .map(|&(s, t, c)| {
            let sign = if c == '+' {
                Sign::Activation
            } else {
                Sign::Repression
            };
            (s - 1, t - 1, sign)
        })
        .collect();
    let mut spec = NetworkSpec::new(genes, edges)?;
    for &i in or_genes {
        spec.rules[i - 1] = Combine::Or;
    }
    Ok(spec)
}

/// Looks up a built-in topology by name (case-insensitive). `chain:N`
/// builds an N-gene activation chain for scaling runs.
pub fn builtin_network(name: &str) -> Result<NetworkSpec> {
    if let Some(n) = name.strip_prefix("chain:") {
        let n: usize = n
            .parse()
            .map_err(|_| GrnError::Spec(format!("bad chain length in {name:?}")))?;
        if n < 2 {
            return Err(GrnError::Spec("chain needs at least 2 genes".into()));
        }
        return build(n, &chain_edges(n), &[]);
    }
    match name.to_ascii_uppercase().as_str() {
        "LI" => build(7, &chain_edges(7), &[]),
        "LL" => build(18, &chain_edges(18), &[]),
        "CY" => build(6, CY, &[]),
        "BF" => build(7, BF, &[]),
        "BFC" => build(10, BFC, &[7]),
        "TF" => build(8, TF, &[]),
        "MCAD" => build(5, MCAD, &[]),
        "VSC" => build(8, VSC, &[]),
        "HSC" => build(11, HSC, &[]),
        "GSD" => build(19, GSD, &[]),
        _ => Err(GrnError::Spec(format!(
            "unknown network {name:?}; expected one of {} or chain:N",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn has_cycle(spec: &NetworkSpec) -> bool {
        let g = spec.n_genes();
        let mut adj = vec![Vec::new(); g];
        for &(s, t, _) in &spec.edges {
            adj[s].push(t);
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        fn dfs(u: usize, adj: &[Vec<usize>], state: &mut [u8]) -> bool {
            state[u] = 1;
            for &v in &adj[u] {
                if state[v] == 1 || (state[v] == 0 && dfs(v, adj, state)) {
                    return true;
                }
            }
            state[u] = 2;
            false
        }
        let mut state = vec![0u8; g];
        (0..g).any(|u| state[u] == 0 && dfs(u, &adj, &mut state))
    }

    #[test]
    fn sizes_match_catalogue() {
        let expect = [
            ("LI", 7),
            ("LL", 18),
            ("CY", 6),
            ("BF", 7),
            ("BFC", 10),
            ("TF", 8),
            ("mCAD", 5),
            ("VSC", 8),
            ("HSC", 11),
            ("GSD", 19),
        ];
        for (name, g) in expect {
            let spec = builtin_network(name).unwrap();
            assert_eq!(spec.n_genes(), g, "{name}");
            spec.validate().unwrap();
        }
    }

    #[test]
    fn li_is_six_edge_chain() {
        let spec = builtin_network("LI").unwrap();
        assert_eq!(spec.edges.len(), 6);
        assert!(spec.edges.iter().all(|&(s, t, _)| t == s + 1));
        assert!(!has_cycle(&spec));
    }

    #[test]
    fn cy_contains_cycle() {
        assert!(has_cycle(&builtin_network("CY").unwrap()));
    }

    #[test]
    fn chain_and_unknown() {
        assert_eq!(builtin_network("chain:30").unwrap().n_genes(), 30);
        assert!(builtin_network("XYZ").is_err());
        assert!(builtin_network("chain:x").is_err());
        assert_eq!(builtin_network("li").unwrap().n_genes(), 7);
    }
}
