use crate::error::{Error, Result};

/// Anything that owns a fixed, ordered set of named parameter tensors.
///
/// Visit order is part of the contract: gradients, optimizer state and
/// checkpoints all rely on it being stable.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64]));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, p| n += p.len());
        n
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit(&mut |_, p| out.extend_from_slice(p));
        out
    }

    fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        self.visit_mut(&mut |_, p| {
            p.copy_from_slice(&flat[offset..offset + p.len()]);
            offset += p.len();
        });
        Ok(())
    }
}

/// A single free-standing parameter vector; handy for scalar objectives.
impl Parameters for Vec<f64> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("w", self);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("w", self);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradEntry {
    pub name: String,
    pub values: Vec<f64>,
}

/// Partial derivatives of a scalar loss, one entry per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientRecord {
    pub entries: Vec<GradEntry>,
}

impl GradientRecord {
    pub fn zeros_like<P: Parameters + ?Sized>(params: &P) -> Self {
        let mut entries = Vec::new();
        params.visit(&mut |name, p| {
            entries.push(GradEntry {
                name: name.to_string(),
                values: vec![0.0; p.len()],
            })
        });
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(|e| e.values.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| e.values.iter().copied())
            .collect()
    }

    pub fn scale(&mut self, factor: f64) {
        for e in &mut self.entries {
            e.values.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `self += factor * other`; shapes must match.
    pub fn add_scaled(&mut self, other: &GradientRecord, factor: f64) -> Result<()> {
        if !self.same_layout(other) {
            return Err(Error::Shape("gradient records have different layouts".into()));
        }
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            for (x, y) in a.values.iter_mut().zip(&b.values) {
                *x += factor * y;
            }
        }
        Ok(())
    }

    fn same_layout(&self, other: &GradientRecord) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && a.values.len() == b.values.len())
    }

    /// True when the record has one entry per tensor of `params`, in order.
    pub fn is_congruent<P: Parameters + ?Sized>(&self, params: &P) -> bool {
        let mut i = 0;
        let mut ok = true;
        params.visit(&mut |name, p| {
            match self.entries.get(i) {
                Some(e) if e.name == name && e.values.len() == p.len() => {}
                _ => ok = false,
            }
            i += 1;
        });
        ok && i == self.entries.len()
    }

    /// First non-finite partial, reported as `tensor[index]`.
    pub fn first_non_finite(&self) -> Option<String> {
        self.entries.iter().find_map(|e| {
            e.values
                .iter()
                .position(|v| !v.is_finite())
                .map(|i| format!("{}[{i}]", e.name))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|e| e.values.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let mut p = vec![1.0, 2.0, 3.0];
        let flat = p.flat_params();
        p.set_flat_params(&[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(p, vec![4.0, 5.0, 6.0]);
        assert_eq!(flat, vec![1.0, 2.0, 3.0]);
        assert!(p.set_flat_params(&[1.0]).is_err());
    }

    #[test]
    fn congruence_and_non_finite_path() {
        let p = vec![0.0; 4];
        let mut g = GradientRecord::zeros_like(&p);
        assert!(g.is_congruent(&p));
        assert!(!g.is_congruent(&vec![0.0; 3]));
        g.entries[0].values[2] = f64::INFINITY;
        assert_eq!(g.first_non_finite().as_deref(), Some("w[2]"));
    }
}
