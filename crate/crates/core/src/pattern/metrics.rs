use std::collections::BTreeMap;

use crate::{Error, Result};

/// Counts `table[i][j]` of rows with the i-th distinct value of `a` and the
/// j-th distinct value of `b` (distinct values in increasing order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    pub row_ids: Vec<usize>,
    pub col_ids: Vec<usize>,
    pub table: Vec<Vec<usize>>,
}

pub fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::dimension("label vectors", a.len(), b.len()));
    }
    let index = |xs: &[usize]| -> BTreeMap<usize, usize> {
        let mut m: BTreeMap<usize, usize> = xs.iter().map(|&x| (x, 0)).collect();
        for (i, v) in m.values_mut().enumerate() {
            *v = i;
        }
        m
    };
    let (ia, ib) = (index(a), index(b));
    let mut table = vec![vec![0; ib.len()]; ia.len()];
    for (x, y) in a.iter().zip(b) {
        table[ia[x]][ib[y]] += 1;
    }
    Ok(Contingency {
        row_ids: ia.into_keys().collect(),
        col_ids: ib.into_keys().collect(),
        table,
    })
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(A;B) / sqrt(H(A) H(B))`, natural logs; 0 when either labeling is
/// constant.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = contingency(a, b)?;
    let n = a.len() as f64;
    if a.is_empty() {
        return Ok(0.0);
    }
    let rows: Vec<usize> = c.table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..c.col_ids.len()).map(|j| c.table.iter().map(|r| r[j]).sum()).collect();
    let (ha, hb) = (entropy(rows.iter().copied(), n), entropy(cols.iter().copied(), n));
    if ha <= 0.0 || hb <= 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

const MAX_MATCHED_GROUPS: usize = 8;

/// Best agreement fraction over one-to-one matchings of predicted clusters
/// to true classes, by exhaustive search.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let k = c.row_ids.len().max(c.col_ids.len());
    if k > MAX_MATCHED_GROUPS {
        return Err(Error::validation(format!(
            "exhaustive matching supports at most {MAX_MATCHED_GROUPS} groups, got {k}"
        )));
    }
    let cell = |i: usize, j: usize| c.table.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    permute(&mut perm, 0, &mut |p| {
        best = best.max((0..k).map(|i| cell(i, p[i])).sum());
    });
    Ok(best as f64 / pred.len() as f64)
}

fn permute(p: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == p.len() {
        visit(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, visit);
        p.swap(start, i);
    }
}
