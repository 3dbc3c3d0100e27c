//! Exact greedy regression trees on gradient/hessian statistics.

use crate::error::{Error, Result};

use super::GbdtParams;

/// Column-major feature storage with every column's row order presorted.
#[derive(Debug, Clone)]
pub struct Columns {
    n_rows: usize,
    cols: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Columns {
    /// `cols[f][r]` is feature `f` of row `r`.
    pub fn new(cols: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != n_rows) {
            return Err(Error::ContractViolation("columns differ in length".into()));
        }
        if n_rows > u32::MAX as usize {
            return Err(Error::ContractViolation("too many rows".into()));
        }
        if cols.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::ContractViolation("non-finite feature value".into()));
        }
        let order = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..n_rows as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Ok(Self {
            n_rows,
            cols,
            order,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::ContractViolation("rows differ in length".into()));
        }
        Self::new(
            (0..n_cols)
                .map(|c| rows.iter().map(|r| r[c]).collect())
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.cols[col][row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.cols[col]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[row]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        weight: f64,
    },
    /// Left child is the next node in preorder; `right` indexes the right child.
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        right: usize,
    },
}

/// Nodes in preorder; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(weight: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { weight }],
        }
    }

    fn eval(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { weight } => return weight,
                Node::Split {
                    feature,
                    threshold,
                    right,
                    ..
                } => i = if value(feature) < threshold { i + 1 } else { right },
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.eval(|f| row[f])
    }

    pub fn predict_column_row(&self, x: &Columns, row: usize) -> f64 {
        self.eval(|f| x.cols[f][row])
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Split {
                feature,
                threshold,
                gain,
                ..
            } => Some((feature, threshold, gain)),
            Node::Leaf { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { right, .. } => 1 + walk(t, i + 1).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }
}

/// Second-order structure gain of splitting a node into the given halves.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let g = gl + gr;
    let h = hl + hr;
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma
}

pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

/// Threshold strictly above `lo` and at most `hi` (`lo < hi`).
fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t > lo && t <= hi {
        t
    } else {
        hi
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    x: &'a Columns,
    g: &'a [f64],
    h: &'a [f64],
    params: &'a GbdtParams,
    /// Per feature, the active rows in value order; every node owns the same
    /// `[start, end)` range in each feature's segment.
    lists: Vec<u32>,
    m: usize,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn best_split(&self, start: usize, end: usize, g_sum: f64, h_sum: f64) -> Option<Candidate> {
        let p = self.params;
        let parent = g_sum * g_sum / (h_sum + p.lambda);
        let mut best: Option<Candidate> = None;
        for f in 0..self.x.n_cols() {
            let seg = &self.lists[f * self.m + start..f * self.m + end];
            let col = &self.x.cols[f];
            if col[seg[0] as usize] == col[seg[seg.len() - 1] as usize] {
                continue;
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..seg.len() - 1 {
                let r = seg[i] as usize;
                gl += self.g[r];
                hl += self.h[r];
                if hl < p.min_child_hessian {
                    continue;
                }
                let hr = h_sum - hl;
                if hr < p.min_child_hessian {
                    break;
                }
                let v = col[r];
                let vn = col[seg[i + 1] as usize];
                if vn <= v {
                    continue;
                }
                let gr = g_sum - gl;
                let gain = 0.5 * (gl * gl / (hl + p.lambda) + gr * gr / (hr + p.lambda) - parent)
                    - p.gamma;
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        feature: f,
                        threshold: midpoint(v, vn),
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, start: usize, end: usize, depth: usize) {
        let seg0 = &self.lists[start..end];
        let g_sum: f64 = seg0.iter().map(|&r| self.g[r as usize]).sum();
        let h_sum: f64 = seg0.iter().map(|&r| self.h[r as usize]).sum();
        let p = self.params;
        let leaf = Node::Leaf {
            weight: leaf_weight(g_sum, h_sum, p.lambda),
        };
        if depth >= p.max_depth || end - start < 2 || h_sum < 2.0 * p.min_child_hessian {
            self.nodes.push(leaf);
            return;
        }
        let best = match self.best_split(start, end, g_sum, h_sum) {
            Some(b) if b.gain > 0.0 => b,
            _ => {
                self.nodes.push(leaf);
                return;
            }
        };

        let col = &self.x.cols[best.feature];
        for &r in &self.lists[best.feature * self.m + start..best.feature * self.m + end] {
            self.goes_left[r as usize] = col[r as usize] < best.threshold;
        }
        let mut n_left = 0;
        for f in 0..self.x.n_cols() {
            let seg = &mut self.lists[f * self.m + start..f * self.m + end];
            let mut l = 0;
            self.scratch.clear();
            for i in 0..seg.len() {
                let r = seg[i];
                if self.goes_left[r as usize] {
                    seg[l] = r;
                    l += 1;
                } else {
                    self.scratch.push(r);
                }
            }
            seg[l..].copy_from_slice(&self.scratch);
            n_left = l;
        }

        let at = self.nodes.len();
        self.nodes.push(Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            gain: best.gain,
            right: 0,
        });
        self.grow(start, start + n_left, depth + 1);
        let right_at = self.nodes.len();
        if let Node::Split { right, .. } = &mut self.nodes[at] {
            *right = right_at;
        }
        self.grow(start + n_left, end, depth + 1);
    }
}

/// Fits one tree on the rows in `active_rows` (gradients indexed by row).
///
/// Candidate thresholds are midpoints between consecutive distinct values;
/// rows go left when `value < threshold`. Among equal gains the lowest
/// feature index, then the lowest threshold, wins.
pub fn fit_tree(
    x: &Columns,
    g: &[f64],
    h: &[f64],
    params: &GbdtParams,
    active_rows: &[usize],
) -> Result<Tree> {
    if active_rows.is_empty() {
        return Err(Error::ContractViolation("no active rows".into()));
    }
    if g.len() != x.n_rows() || h.len() != x.n_rows() {
        return Err(Error::ContractViolation("gradient length differs from row count".into()));
    }
    if x.n_cols() == 0 {
        let gs: f64 = active_rows.iter().map(|&r| g[r]).sum();
        let hs: f64 = active_rows.iter().map(|&r| h[r]).sum();
        return Ok(Tree::leaf(leaf_weight(gs, hs, params.lambda)));
    }
    let mut active = vec![false; x.n_rows()];
    for &r in active_rows {
        if r >= x.n_rows() {
            return Err(Error::ContractViolation(format!("row {r} out of range")));
        }
        active[r] = true;
    }
    let m = active.iter().filter(|&&a| a).count();
    let mut lists = Vec::with_capacity(m * x.n_cols());
    for order in &x.order {
        lists.extend(order.iter().copied().filter(|&r| active[r as usize]));
    }
    let mut b = Builder {
        x,
        g,
        h,
        params,
        lists,
        m,
        goes_left: vec![false; x.n_rows()],
        scratch: Vec::with_capacity(m),
        nodes: Vec::new(),
    };
    b.grow(0, m, 0);
    Ok(Tree { nodes: b.nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(depth: usize) -> GbdtParams {
        GbdtParams {
            max_depth: depth,
            min_child_hessian: 0.0,
            ..GbdtParams::default()
        }
    }

    #[test]
    fn gain_examples() {
        // identical halves carry no information (exactly zero without the L2 term)
        assert_eq!(split_gain(1.0, 2.0, 1.0, 2.0, 0.0, 0.0), 0.0);
        assert!(split_gain(1.0, 2.0, 1.0, 2.0, 1.0, 0.0) <= 0.0);
        assert_eq!(split_gain(-2.0, 1.0, 2.0, 1.0, 1.0, 0.0), 2.0);
        assert!(split_gain(-2.0, 1.0, 2.0, 1.0, 1.0, 2.5) < 0.0);
    }

    #[test]
    fn separable_stump() {
        let x = Columns::new(vec![vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        // gradients of y = [0, 0, 1, 1] at margin 0
        let g = [0.5, 0.5, -0.5, -0.5];
        let h = [0.25; 4];
        let t = fit_tree(&x, &g, &h, &params(1), &[0, 1, 2, 3]).unwrap();
        let (f, thr, _) = t.splits().next().unwrap();
        assert_eq!(f, 0);
        assert!(thr > 2.0 && thr < 3.0);
        assert!(t.predict(&[1.0]) < 0.0 && t.predict(&[4.0]) > 0.0);
    }

    #[test]
    fn constant_feature_gives_single_leaf() {
        let x = Columns::new(vec![vec![7.0; 5]]).unwrap();
        let g = [0.3, -0.1, 0.2, 0.5, -0.4];
        let h = [0.2; 5];
        let t = fit_tree(&x, &g, &h, &params(3), &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { weight: -0.5 / (1.0 + 1.0) }]);
    }

    #[test]
    fn empty_rows_rejected() {
        let x = Columns::new(vec![vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            fit_tree(&x, &[0.0; 2], &[1.0; 2], &params(1), &[]),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn midpoint_never_collapses_onto_lower_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = midpoint(a, b);
        assert!(a < t && t <= b);
    }

    #[test]
    fn respects_depth_limit() {
        let v: Vec<f64> = (0..64).map(f64::from).collect();
        let x = Columns::new(vec![v]).unwrap();
        let g: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let rows: Vec<usize> = (0..64).collect();
        let t = fit_tree(&x, &g, &[1.0; 64], &params(3), &rows).unwrap();
        assert!(t.depth() <= 3);
    }
}
