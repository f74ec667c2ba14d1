use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Embedding};
use crate::error::{Error, Result};
use crate::neighbors::build_index;

/// Counts of violations of the separation and transition conditions under
/// a given K, measured against ground-truth structure ids.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// KNN edges whose endpoints lie in different structures.
    pub separation_violations: usize,
    /// Connected pieces of a class subset with no edge to or from the rest
    /// of their structure.
    pub isolated_subsets: usize,
    /// Instances that no other member of their class subset lists as a neighbor.
    pub outliers: usize,
    /// Structures whose induced KNN digraph is not strongly connected, i.e.
    /// some seed inside cannot reach every other member.
    pub disconnected_structures: usize,
}

impl AssumptionReport {
    pub fn all_clear(&self) -> bool {
        *self == AssumptionReport::default()
    }
}

pub fn check_assumptions(ds: &Dataset, emb: &Embedding, k: usize) -> Result<AssumptionReport> {
    let sid = ds
        .structure_ids()
        .ok_or_else(|| Error::Domain("assumption check needs ground-truth structure ids".into()))?;
    let labels = ds.labels();
    let n = ds.n();
    let all: Vec<usize> = (0..n).collect();
    let idx = build_index(emb, labels, &all, k)?;
    let out = |i: usize| idx.neighbors(i).expect("all instances active");
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in out(i) {
            incoming[j].push(i);
        }
    }
    let mut report = AssumptionReport::default();

    report.separation_violations = (0..n)
        .map(|i| out(i).iter().filter(|&&j| sid[j] != sid[i]).count())
        .sum();

    let same_subset = |a: usize, b: usize| sid[a] == sid[b] && labels[a] == labels[b];
    report.outliers = (0..n)
        .filter(|&i| !incoming[i].iter().any(|&p| p != i && same_subset(p, i)))
        .count();

    // weak components of each class subset
    let mut comp = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let c = components.len();
        comp[start] = c;
        let mut stack = vec![start];
        let mut members = Vec::new();
        while let Some(x) = stack.pop() {
            members.push(x);
            for &y in out(x).iter().chain(&incoming[x]) {
                if comp[y] == usize::MAX && same_subset(x, y) {
                    comp[y] = c;
                    stack.push(y);
                }
            }
        }
        components.push(members);
    }
    let structure_size = |s: usize| sid.iter().filter(|&&t| t == s).count();
    for (c, members) in components.iter().enumerate() {
        let s = sid[members[0]];
        if members.len() == structure_size(s) {
            continue;
        }
        let touches_rest = members.iter().any(|&x| {
            out(x)
                .iter()
                .chain(&incoming[x])
                .any(|&y| sid[y] == s && comp[y] != c)
        });
        if !touches_rest {
            report.isolated_subsets += 1;
        }
    }

    let n_structures = sid.iter().max().map_or(0, |&m| m + 1);
    for s in 0..n_structures {
        let members: Vec<usize> = (0..n).filter(|&i| sid[i] == s).collect();
        let Some(&root) = members.first() else { continue };
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            seen[root] = true;
            let mut stack = vec![root];
            let mut count = 1;
            while let Some(x) = stack.pop() {
                let next: &[usize] = if forward { out(x) } else { &incoming[x] };
                for &y in next {
                    if sid[y] == s && !seen[y] {
                        seen[y] = true;
                        count += 1;
                        stack.push(y);
                    }
                }
            }
            count
        };
        if reach(true) < members.len() || reach(false) < members.len() {
            report.disconnected_structures += 1;
        }
    }
    Ok(report)
}
