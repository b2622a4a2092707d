//! Quadratic pseudo-Boolean models over `z ∈ {0,1}^V`:
//! `E(z) = c + Σ a_i z_i + Σ_{i<j} q_ij z_i z_j`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{arg_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuboModel {
    constant: f64,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
}

impl QuboModel {
    pub fn new(num_vars: usize) -> QuboModel {
        QuboModel {
            constant: 0.0,
            linear: vec![0.0; num_vars],
            quadratic: BTreeMap::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn add_linear(&mut self, i: usize, c: f64) {
        self.linear[i] += c;
    }

    /// Adds `c·z_i·z_j`; the diagonal folds into the linear part.
    pub fn add_quadratic(&mut self, i: usize, j: usize, c: f64) {
        assert!(i < self.num_vars() && j < self.num_vars(), "variable index out of range");
        if i == j {
            self.linear[i] += c;
            return;
        }
        let key = (i.min(j), i.max(j));
        let entry = self.quadratic.entry(key).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.quadratic.remove(&key);
        }
    }

    /// Adds `scale · a · b` for two affine expressions.
    pub fn add_product(&mut self, a: &LinExpr, b: &LinExpr, scale: f64) {
        if scale == 0.0 {
            return;
        }
        self.constant += scale * a.constant * b.constant;
        for &(i, ai) in &a.terms {
            self.linear[i] += scale * ai * b.constant;
        }
        for &(j, bj) in &b.terms {
            self.linear[j] += scale * a.constant * bj;
        }
        for &(i, ai) in &a.terms {
            for &(j, bj) in &b.terms {
                self.add_quadratic(i, j, scale * ai * bj);
            }
        }
    }

    pub fn add_square(&mut self, a: &LinExpr, scale: f64) {
        self.add_product(a, a, scale);
    }

    pub fn add_affine(&mut self, a: &LinExpr, scale: f64) {
        self.constant += scale * a.constant;
        for &(i, ai) in &a.terms {
            self.linear[i] += scale * ai;
        }
    }

    /// Rounds every coefficient to single precision.
    pub fn to_single_precision(&self) -> QuboModel {
        let r = |x: f64| x as f32 as f64;
        QuboModel {
            constant: r(self.constant),
            linear: self.linear.iter().map(|&x| r(x)).collect(),
            quadratic: self
                .quadratic
                .iter()
                .map(|(&k, &v)| (k, r(v)))
                .filter(|(_, v)| *v != 0.0)
                .collect(),
        }
    }

    fn check_len(&self, z: &[u8]) -> Result<()> {
        if z.len() != self.num_vars() {
            return arg_err(format!("state has {} bits, model has {} variables", z.len(), self.num_vars()));
        }
        Ok(())
    }

    pub fn energy(&self, z: &[u8]) -> Result<f64> {
        self.check_len(z)?;
        let mut e = self.constant;
        for (i, &a) in self.linear.iter().enumerate() {
            if z[i] != 0 {
                e += a;
            }
        }
        for (&(i, j), &q) in &self.quadratic {
            if z[i] != 0 && z[j] != 0 {
                e += q;
            }
        }
        Ok(e)
    }

    /// `E(z with bit i flipped) − E(z)`.
    pub fn delta_energy(&self, z: &[u8], i: usize) -> Result<f64> {
        self.check_len(z)?;
        if i >= self.num_vars() {
            return arg_err(format!("flip index {i} out of range for {} variables", self.num_vars()));
        }
        let mut field = self.linear[i];
        for (&(a, b), &q) in &self.quadratic {
            let other = if a == i { b } else if b == i { a } else { continue };
            if z[other] != 0 {
                field += q;
            }
        }
        Ok(if z[i] == 0 { field } else { -field })
    }

    /// Sparse text export:
    ///
    /// ```text
    /// # free-form comment lines
    /// <V>
    /// const <c>
    /// <i> <a_i>          nonzero linear terms
    /// <i> <j> <q_ij>     i < j
    /// ```
    pub fn to_sparse_text(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.num_vars());
        let _ = writeln!(out, "const {}", self.constant);
        for (i, &a) in self.linear.iter().enumerate() {
            if a != 0.0 {
                let _ = writeln!(out, "{i} {a}");
            }
        }
        for (&(i, j), &q) in &self.quadratic {
            let _ = writeln!(out, "{i} {j} {q}");
        }
        out
    }

    pub fn from_sparse_text(text: &str) -> Result<QuboModel> {
        let mut model: Option<QuboModel> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |column: usize, message: String| Error::Parse { line: line_no, column, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let Some(m) = model.as_mut() else {
                let v = line.parse::<usize>().map_err(|_| perr(1, format!("expected variable count, found {line:?}")))?;
                model = Some(QuboModel::new(v));
                continue;
            };
            let col = |k: usize| raw.find(fields[k]).map_or(1, |c| c + 1);
            let num = |k: usize| -> Result<f64> {
                fields[k].parse::<f64>().map_err(|_| perr(col(k), format!("invalid number {:?}", fields[k])))
            };
            let var = |k: usize, m: &QuboModel| -> Result<usize> {
                match fields[k].parse::<usize>() {
                    Ok(i) if i < m.num_vars() => Ok(i),
                    _ => Err(perr(col(k), format!("invalid variable index {:?}", fields[k]))),
                }
            };
            match fields.as_slice() {
                ["const", _] => m.constant += num(1)?,
                [_, _] => {
                    let i = var(0, m)?;
                    m.linear[i] += num(1)?;
                }
                [_, _, _] => {
                    let (i, j) = (var(0, m)?, var(1, m)?);
                    m.add_quadratic(i, j, num(2)?);
                }
                _ => return Err(perr(1, format!("unrecognised line {line:?}"))),
            }
        }
        model.ok_or_else(|| Error::Parse { line: 1, column: 1, message: "missing variable count".into() })
    }

    pub fn save(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        std::fs::write(path, self.to_sparse_text(comments))?;
        Ok(())
    }
}

/// Affine expression `constant + Σ coeff·z_var` used to assemble penalties.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl LinExpr {
    pub fn constant(c: f64) -> LinExpr {
        LinExpr { constant: c, terms: Vec::new() }
    }

    pub fn add(&mut self, var: usize, coeff: f64) -> &mut Self {
        self.terms.push((var, coeff));
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn normalized(mut self) -> LinExpr {
        self.terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (v, c) in self.terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        LinExpr { constant: self.constant, terms: merged }
    }

    pub fn eval(&self, z: &[u8]) -> f64 {
        self.constant + self.terms.iter().filter(|(v, _)| z[*v] != 0).map(|(_, c)| c).sum::<f64>()
    }
}

/// Symmetric adjacency view of a model for incremental local-field updates.
#[derive(Debug, Clone)]
pub struct Couplings {
    pub linear: Vec<f64>,
    pub offsets: Vec<usize>,
    pub neighbours: Vec<u32>,
    pub weights: Vec<f64>,
    pub constant: f64,
}

impl Couplings {
    pub fn new(q: &QuboModel) -> Couplings {
        let n = q.num_vars();
        let mut degree = vec![0usize; n];
        for &(i, j) in q.quadratic.keys() {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut neighbours = vec![0u32; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for (&(i, j), &w) in &q.quadratic {
            neighbours[fill[i]] = j as u32;
            weights[fill[i]] = w;
            fill[i] += 1;
            neighbours[fill[j]] = i as u32;
            weights[fill[j]] = w;
            fill[j] += 1;
        }
        Couplings {
            linear: q.linear.clone(),
            offsets,
            neighbours,
            weights,
            constant: q.constant,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    /// `∂E/∂z_i` at `z`: linear coefficient plus active couplings.
    pub fn fields(&self, z: &[u8]) -> Vec<f64> {
        (0..self.num_vars())
            .map(|i| {
                let mut h = self.linear[i];
                for k in self.offsets[i]..self.offsets[i + 1] {
                    if z[self.neighbours[k] as usize] != 0 {
                        h += self.weights[k];
                    }
                }
                h
            })
            .collect()
    }

    pub fn energy(&self, z: &[u8]) -> f64 {
        let mut e = self.constant;
        for i in 0..self.num_vars() {
            if z[i] == 0 {
                continue;
            }
            e += self.linear[i];
            for k in self.offsets[i]..self.offsets[i + 1] {
                let j = self.neighbours[k] as usize;
                if j > i && z[j] != 0 {
                    e += self.weights[k];
                }
            }
        }
        e
    }
}
