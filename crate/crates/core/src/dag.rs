//! Operation DAGs of BLAS kernels and 2x2 block multiplication schemes.
//!
//! Every floating-point operation is one node. Inputs sit at level 0 and
//! every other node one level above its deepest operand (ASAP grading).
//! Output nodes mark results; they are not counted as compute levels.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{oracle_gemm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Input,
    Mul,
    Add,
    Sub,
    Sqrt,
    Output,
}

impl OpKind {
    pub fn is_compute(self) -> bool {
        !matches!(self, OpKind::Input | OpKind::Output)
    }

    fn name(self) -> &'static str {
        match self {
            OpKind::Input => "input",
            OpKind::Mul => "mul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Sqrt => "sqrt",
            OpKind::Output => "output",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Node {
    pub id: usize,
    pub kind: OpKind,
    pub label: String,
    /// Operands in order (the order matters for `sub`).
    pub args: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Dag {
    pub name: String,
    pub nodes: Vec<Node>,
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DagKind {
    Ddot,
    Dnrm2,
    Daxpy,
    Gemv,
    Gemm,
    Smm2x2,
    Wmm2x2,
    Gemm2x2,
}

impl DagKind {
    pub const ALL: [DagKind; 8] = [
        DagKind::Ddot,
        DagKind::Dnrm2,
        DagKind::Daxpy,
        DagKind::Gemv,
        DagKind::Gemm,
        DagKind::Smm2x2,
        DagKind::Wmm2x2,
        DagKind::Gemm2x2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DagKind::Ddot => "ddot",
            DagKind::Dnrm2 => "dnrm2",
            DagKind::Daxpy => "daxpy",
            DagKind::Gemv => "gemv",
            DagKind::Gemm => "gemm",
            DagKind::Smm2x2 => "smm2x2",
            DagKind::Wmm2x2 => "wmm2x2",
            DagKind::Gemm2x2 => "gemm2x2",
        }
    }
}

impl FromStr for DagKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DagKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Spec(format!("unknown DAG kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KernelSpec {
    pub kind: DagKind,
    /// Problem size; ignored by the 2x2 block schemes.
    pub n: usize,
}

impl KernelSpec {
    pub fn new(kind: DagKind, n: usize) -> Self {
        Self { kind, n }
    }
}

/// Incremental DAG construction; levels are assigned as nodes are added.
struct Builder {
    name: String,
    nodes: Vec<Node>,
    levels: Vec<usize>,
}

impl Builder {
    fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), nodes: Vec::new(), levels: Vec::new() }
    }

    fn node(&mut self, kind: OpKind, label: impl Into<String>, args: &[usize]) -> usize {
        let id = self.nodes.len();
        let level = args.iter().map(|&a| self.levels[a] + 1).max().unwrap_or(0);
        self.nodes.push(Node { id, kind, label: label.into(), args: args.to_vec() });
        self.levels.push(level);
        id
    }

    fn input(&mut self, label: impl Into<String>) -> usize {
        self.node(OpKind::Input, label, &[])
    }

    /// Balanced pairwise reduction of `terms` with adds.
    fn tree_sum(&mut self, mut terms: Vec<usize>, prefix: &str) -> usize {
        let mut k = 0;
        while terms.len() > 1 {
            terms = terms
                .chunks(2)
                .map(|pair| match pair {
                    [a, b] => {
                        k += 1;
                        self.node(OpKind::Add, format!("{prefix}+{k}"), &[*a, *b])
                    }
                    [a] => *a,
                    _ => unreachable!(),
                })
                .collect();
        }
        terms[0]
    }

    fn finish(self) -> Dag {
        Dag { name: self.name, nodes: self.nodes, levels: self.levels }
    }
}

pub fn build_dag(spec: KernelSpec) -> Result<Dag> {
    let n = spec.n;
    let needs_n = !matches!(spec.kind, DagKind::Smm2x2 | DagKind::Wmm2x2 | DagKind::Gemm2x2);
    if needs_n && n == 0 {
        return Err(Error::Spec("n must be at least 1".into()));
    }
    let pow2 = || {
        if n.is_power_of_two() {
            Ok(())
        } else {
            Err(Error::Spec(format!("{} DAG needs a power-of-two n for a balanced tree, got {n}", spec.kind.name())))
        }
    };
    Ok(match spec.kind {
        DagKind::Ddot | DagKind::Dnrm2 => {
            pow2()?;
            let mut b = Builder::new(format!("{}_{n}", spec.kind.name()));
            let xs: Vec<usize> = (0..n).map(|i| b.input(format!("x{i}"))).collect();
            let ys: Vec<usize> =
                if spec.kind == DagKind::Ddot { (0..n).map(|i| b.input(format!("y{i}"))).collect() } else { xs.clone() };
            let prods: Vec<usize> = (0..n).map(|i| b.node(OpKind::Mul, format!("p{i}"), &[xs[i], ys[i]])).collect();
            let mut r = b.tree_sum(prods, "s");
            if spec.kind == DagKind::Dnrm2 {
                r = b.node(OpKind::Sqrt, "sqrt", &[r]);
            }
            b.node(OpKind::Output, if spec.kind == DagKind::Ddot { "c" } else { "k" }, &[r]);
            b.finish()
        }
        DagKind::Daxpy => {
            let mut b = Builder::new(format!("daxpy_{n}"));
            let a = b.input("a");
            for i in 0..n {
                let x = b.input(format!("x{i}"));
                let y = b.input(format!("y{i}"));
                let p = b.node(OpKind::Mul, format!("p{i}"), &[a, x]);
                let s = b.node(OpKind::Add, format!("s{i}"), &[p, y]);
                b.node(OpKind::Output, format!("y{i}'"), &[s]);
            }
            b.finish()
        }
        DagKind::Gemv => {
            pow2()?;
            let mut b = Builder::new(format!("gemv_{n}"));
            let xs: Vec<usize> = (0..n).map(|j| b.input(format!("x{j}"))).collect();
            for i in 0..n {
                let prods: Vec<usize> = (0..n)
                    .map(|j| {
                        let a = b.input(format!("a{i}_{j}"));
                        b.node(OpKind::Mul, format!("p{i}_{j}"), &[a, xs[j]])
                    })
                    .collect();
                let r = b.tree_sum(prods, &format!("r{i}"));
                b.node(OpKind::Output, format!("y{i}"), &[r]);
            }
            b.finish()
        }
        DagKind::Gemm => {
            pow2()?;
            let mut b = Builder::new(format!("gemm_{n}"));
            let a: Vec<usize> = (0..n * n).map(|t| b.input(format!("a{}_{}", t / n, t % n))).collect();
            let bm: Vec<usize> = (0..n * n).map(|t| b.input(format!("b{}_{}", t / n, t % n))).collect();
            for i in 0..n {
                for j in 0..n {
                    let prods: Vec<usize> = (0..n)
                        .map(|k| b.node(OpKind::Mul, format!("p{i}_{j}_{k}"), &[a[i * n + k], bm[k * n + j]]))
                        .collect();
                    let r = b.tree_sum(prods, &format!("c{i}_{j}"));
                    b.node(OpKind::Output, format!("c{i}_{j}"), &[r]);
                }
            }
            b.finish()
        }
        DagKind::Smm2x2 => smm2x2(),
        DagKind::Wmm2x2 => wmm2x2(),
        DagKind::Gemm2x2 => gemm2x2(),
    })
}

const BLOCK_INPUTS: [&str; 8] = ["A11", "A12", "A21", "A22", "B11", "B12", "B21", "B22"];

/// A 2x2 block scheme written as `(name, op, lhs, rhs)` lines over the
/// block inputs and earlier names, followed by the four outputs.
fn block_scheme(name: &str, lines: &[(&str, OpKind, &str, &str)]) -> Dag {
    let mut b = Builder::new(name);
    let mut names: Vec<(String, usize)> = BLOCK_INPUTS.iter().map(|s| (s.to_string(), 0)).collect();
    for (slot, label) in names.iter_mut().zip(BLOCK_INPUTS) {
        slot.1 = b.input(label);
    }
    let find = |names: &[(String, usize)], s: &str| {
        names.iter().find(|(n, _)| n == s).map(|&(_, id)| id).unwrap_or_else(|| panic!("undefined name {s}"))
    };
    for &(out, op, l, r) in lines {
        let args = [find(&names, l), find(&names, r)];
        let id = b.node(op, out, &args);
        names.push((out.to_string(), id));
    }
    for c in ["C11", "C12", "C21", "C22"] {
        let id = find(&names, c);
        b.node(OpKind::Output, format!("{c}_out"), &[id]);
    }
    b.finish()
}

/// Strassen, first recursion step. `T10 = A21 + A22` feeds `M2`, and
/// `C11 = M1 + M4 - M5 + M7`.
fn smm2x2() -> Dag {
    use OpKind::{Add, Mul, Sub};
    block_scheme(
        "smm2x2",
        &[
            ("T1", Add, "A11", "A22"),
            ("T2", Add, "B11", "B22"),
            ("T3", Sub, "B12", "B22"),
            ("T4", Sub, "B21", "B11"),
            ("T5", Add, "A11", "A12"),
            ("T6", Sub, "A21", "A11"),
            ("T7", Add, "B11", "B12"),
            ("T8", Sub, "A12", "A22"),
            ("T9", Add, "B21", "B22"),
            ("T10", Add, "A21", "A22"),
            ("M1", Mul, "T1", "T2"),
            ("M2", Mul, "T10", "B11"),
            ("M3", Mul, "A11", "T3"),
            ("M4", Mul, "A22", "T4"),
            ("M5", Mul, "T5", "B22"),
            ("M6", Mul, "T6", "T7"),
            ("M7", Mul, "T8", "T9"),
            ("K1", Add, "M1", "M4"),
            ("K2", Sub, "M5", "M7"),
            ("K3", Sub, "M1", "M2"),
            ("K4", Add, "M3", "M6"),
            ("C12", Add, "M3", "M5"),
            ("C21", Add, "M2", "M4"),
            ("C11", Sub, "K1", "K2"),
            ("C22", Add, "K3", "K4"),
        ],
    )
}

/// Winograd's variant: 7 block products, 15 block additions.
fn wmm2x2() -> Dag {
    use OpKind::{Add, Mul, Sub};
    block_scheme(
        "wmm2x2",
        &[
            ("S1", Add, "A21", "A22"),
            ("S3", Sub, "A11", "A21"),
            ("S5", Sub, "B12", "B11"),
            ("S7", Sub, "B22", "B12"),
            ("M2", Mul, "A11", "B11"),
            ("M3", Mul, "A12", "B21"),
            ("S2", Sub, "S1", "A11"),
            ("S6", Sub, "B22", "S5"),
            ("M4", Mul, "S3", "S7"),
            ("M5", Mul, "S1", "S5"),
            ("C11", Add, "M2", "M3"),
            ("S4", Sub, "A12", "S2"),
            ("S8", Sub, "S6", "B21"),
            ("M1", Mul, "S2", "S6"),
            ("M6", Mul, "S4", "B22"),
            ("M7", Mul, "A22", "S8"),
            ("V1", Add, "M1", "M2"),
            ("V2", Add, "V1", "M4"),
            ("K1", Add, "M5", "M6"),
            ("C12", Add, "V1", "K1"),
            ("C21", Sub, "V2", "M7"),
            ("C22", Add, "V2", "M5"),
        ],
    )
}

fn gemm2x2() -> Dag {
    use OpKind::{Add, Mul};
    block_scheme(
        "gemm2x2",
        &[
            ("P1", Mul, "A11", "B11"),
            ("P2", Mul, "A12", "B21"),
            ("P3", Mul, "A11", "B12"),
            ("P4", Mul, "A12", "B22"),
            ("P5", Mul, "A21", "B11"),
            ("P6", Mul, "A22", "B21"),
            ("P7", Mul, "A21", "B12"),
            ("P8", Mul, "A22", "B22"),
            ("C11", Add, "P1", "P2"),
            ("C12", Add, "P3", "P4"),
            ("C21", Add, "P5", "P6"),
            ("C22", Add, "P7", "P8"),
        ],
    )
}

impl Dag {
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.iter().flat_map(|n| n.args.iter().map(move |&a| (a, n.id)))
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Additions and subtractions together.
    pub fn add_count(&self) -> usize {
        self.count(OpKind::Add) + self.count(OpKind::Sub)
    }

    /// Compute-node count per level, starting at level 1.
    pub fn level_sizes(&self) -> Vec<usize> {
        let depth = self
            .nodes
            .iter()
            .filter(|n| n.kind.is_compute())
            .map(|n| self.levels[n.id])
            .max()
            .unwrap_or(0);
        let mut sizes = vec![0; depth];
        for n in self.nodes.iter().filter(|n| n.kind.is_compute()) {
            sizes[self.levels[n.id] - 1] += 1;
        }
        sizes
    }

    /// Labels of the compute nodes at `level`.
    pub fn level_labels(&self, level: usize) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.kind.is_compute() && self.levels[n.id] == level)
            .map(|n| n.label.as_str())
            .collect()
    }

    /// Graphviz text.
    pub fn to_dot(&self) -> String {
        let mut s = format!("digraph {} {{\n  rankdir=TB;\n", self.name);
        for n in &self.nodes {
            let shape = match n.kind {
                OpKind::Input => "box",
                OpKind::Output => "doublecircle",
                _ => "ellipse",
            };
            let _ = writeln!(
                s,
                "  n{} [label=\"{}\\n{}\" shape={} level={}];",
                n.id,
                n.label,
                n.kind.name(),
                shape,
                self.levels[n.id]
            );
        }
        for (a, b) in self.edges() {
            let _ = writeln!(s, "  n{a} -> n{b};");
        }
        s.push_str("}\n");
        s
    }

    /// Re-derive levels from scratch, failing on cycles, dangling operands
    /// or operand-less compute nodes.
    pub fn check(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for (a, b) in self.edges() {
            if a >= n {
                return Err(Error::Graph(format!("edge from missing node {a}")));
            }
            indeg[b] += 1;
            succ[a].push(b);
        }
        if let Some(v) = self.nodes.iter().find(|v| v.kind != OpKind::Input && v.args.is_empty()) {
            return Err(Error::Graph(format!("node {} ({}) has no operands", v.id, v.label)));
        }
        let mut level = vec![0usize; n];
        let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = ready.pop() {
            seen += 1;
            for &w in &succ[v] {
                level[w] = level[w].max(level[v] + 1);
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.push(w);
                }
            }
        }
        if seen != n {
            return Err(Error::Graph(format!("cycle detected in {}", self.name)));
        }
        Ok(level)
    }
}

/// Number of compute levels.
pub fn critical_path(d: &Dag) -> Result<usize> {
    let levels = d.check()?;
    Ok(d.nodes.iter().filter(|n| n.kind.is_compute()).map(|n| levels[n.id]).max().unwrap_or(0))
}

/// Widest compute level.
pub fn max_parallelism(d: &Dag) -> usize {
    d.level_sizes().into_iter().max().unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockScheme {
    Smm,
    Wmm,
    Gemm,
}

impl FromStr for BlockScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "smm" => Ok(BlockScheme::Smm),
            "wmm" => Ok(BlockScheme::Wmm),
            "gemm" => Ok(BlockScheme::Gemm),
            _ => Err(Error::Spec(format!("unknown block scheme {s:?}"))),
        }
    }
}

/// Multiply `a` by `b`, both `2m × 2m`, by walking the scheme's DAG with
/// `m × m` blocks as values (`m = 1` is the scalar case).
pub fn eval_block2x2(scheme: BlockScheme, a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n || b.cols() != n || n % 2 != 0 {
        return Err(Error::Dimension(format!(
            "2x2 block product needs equal square operands of even size, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let m = n / 2;
    let dag = build_dag(KernelSpec::new(
        match scheme {
            BlockScheme::Smm => DagKind::Smm2x2,
            BlockScheme::Wmm => DagKind::Wmm2x2,
            BlockScheme::Gemm => DagKind::Gemm2x2,
        },
        0,
    ))?;
    let quad = |x: &Matrix, q: usize| x.submatrix((q / 2) * m..(q / 2 + 1) * m, (q % 2) * m..(q % 2 + 1) * m);
    let zero = Matrix::zeros(m, m);
    let elementwise = |x: &Matrix, y: &Matrix, f: fn(f64, f64) -> f64| {
        let data = x.data().iter().zip(y.data()).map(|(p, q)| f(*p, *q)).collect();
        Matrix::from_vec(m, m, data)
    };
    let mut values: Vec<Matrix> = Vec::with_capacity(dag.nodes.len());
    let mut out = Matrix::zeros(n, n);
    for node in &dag.nodes {
        let arg = |i: usize| &values[node.args[i]];
        let v = match node.kind {
            OpKind::Input => {
                let q = BLOCK_INPUTS.iter().position(|s| *s == node.label).expect("block input");
                if q < 4 {
                    quad(a, q)
                } else {
                    quad(b, q - 4)
                }
            }
            OpKind::Mul => oracle_gemm(arg(0), arg(1), &zero)?,
            OpKind::Add => elementwise(arg(0), arg(1), |p, q| p + q)?,
            OpKind::Sub => elementwise(arg(0), arg(1), |p, q| p - q)?,
            OpKind::Sqrt => return Err(Error::Graph("sqrt in a block scheme".into())),
            OpKind::Output => {
                let q = ["C11_out", "C12_out", "C21_out", "C22_out"]
                    .iter()
                    .position(|s| *s == node.label)
                    .expect("block output");
                out.write_block((q / 2) * m, (q % 2) * m, arg(0));
                arg(0).clone()
            }
        };
        values.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::seeded_rng;
    use proptest::prelude::*;

    fn dag(kind: DagKind, n: usize) -> Dag {
        build_dag(KernelSpec::new(kind, n)).unwrap()
    }

    #[test]
    fn ddot_shape() {
        let d = dag(DagKind::Ddot, 8);
        assert_eq!(d.count(OpKind::Mul), 8);
        assert_eq!(d.count(OpKind::Add), 7);
        assert_eq!(critical_path(&d).unwrap(), 4);
        assert_eq!(max_parallelism(&d), 8);
        assert!(build_dag(KernelSpec::new(DagKind::Ddot, 6)).is_err());
    }

    #[test]
    fn dnrm2_adds_one_sqrt() {
        let d = dag(DagKind::Dnrm2, 16);
        assert_eq!(d.count(OpKind::Mul), 16);
        assert_eq!(d.count(OpKind::Add), 15);
        assert_eq!(d.count(OpKind::Sqrt), 1);
        assert_eq!(critical_path(&d).unwrap(), 6);
    }

    #[test]
    fn daxpy_depth() {
        for n in [1, 5, 8] {
            assert_eq!(critical_path(&dag(DagKind::Daxpy, n)).unwrap(), 2);
        }
    }

    #[test]
    fn gemm_parallelism() {
        assert_eq!(max_parallelism(&dag(DagKind::Gemm, 4)), 64);
        let g = dag(DagKind::Gemv, 4);
        assert_eq!(g.count(OpKind::Mul), 16);
        assert_eq!(g.count(OpKind::Add), 12);
    }

    #[test]
    fn wmm_levels() {
        let d = dag(DagKind::Wmm2x2, 0);
        assert_eq!(critical_path(&d).unwrap(), 6);
        assert_eq!(d.level_sizes(), vec![6, 5, 3, 3, 2, 3]);
        assert_eq!(d.level_labels(1), vec!["S1", "S3", "S5", "S7", "M2", "M3"]);
        assert_eq!(d.level_labels(6), vec!["C12", "C21", "C22"]);
        assert_eq!(d.count(OpKind::Mul), 7);
        assert_eq!(d.add_count(), 15);
    }

    #[test]
    fn smm_counts() {
        let d = dag(DagKind::Smm2x2, 0);
        assert_eq!(d.count(OpKind::Mul), 7);
        assert_eq!(d.add_count(), 18);
        assert_eq!(d.level_sizes(), vec![10, 7, 6, 2]);
    }

    #[test]
    fn gemm2x2_counts() {
        let d = dag(DagKind::Gemm2x2, 0);
        assert_eq!(d.count(OpKind::Mul), 8);
        assert_eq!(d.add_count(), 4);
        assert_eq!(critical_path(&d).unwrap(), 2);
    }

    #[test]
    fn block_eval_examples() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[&[5.0, 6.0], &[7.0, 8.0]]).unwrap();
        let want = Matrix::from_rows(&[&[19.0, 22.0], &[43.0, 50.0]]).unwrap();
        for s in [BlockScheme::Gemm, BlockScheme::Smm, BlockScheme::Wmm] {
            assert_eq!(eval_block2x2(s, &a, &b).unwrap(), want);
        }
        assert_eq!(eval_block2x2(BlockScheme::Smm, &Matrix::identity(2), &b).unwrap(), b);
        assert!(eval_block2x2(BlockScheme::Gemm, &Matrix::zeros(3, 3), &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn block_eval_on_blocks() {
        let mut rng = seeded_rng(5);
        let a = Matrix::random(8, 8, &mut rng);
        let b = Matrix::random(8, 8, &mut rng);
        let want = oracle_gemm(&a, &b, &Matrix::zeros(8, 8)).unwrap();
        for s in [BlockScheme::Gemm, BlockScheme::Smm, BlockScheme::Wmm] {
            assert!(eval_block2x2(s, &a, &b).unwrap().max_rel_error(&want) < 1e-12);
        }
    }

    #[test]
    fn dot_export() {
        let s = dag(DagKind::Ddot, 2).to_dot();
        assert!(s.starts_with("digraph ddot_2 {"));
        assert!(s.contains("n0 -> n4;"));
    }

    #[test]
    fn cycles_are_detected() {
        let mut d = dag(DagKind::Ddot, 2);
        d.nodes[4].args.push(6);
        assert!(matches!(critical_path(&d), Err(Error::Graph(_))));
    }

    proptest! {
        #[test]
        fn levels_are_a_topological_grading(kind in 0usize..8, logn in 0u32..5) {
            let d = dag(DagKind::ALL[kind], 1 << logn);
            prop_assert_eq!(d.check().unwrap(), d.levels.clone());
            for (a, b) in d.edges() {
                prop_assert!(d.levels[a] < d.levels[b]);
            }
        }
    }
}
