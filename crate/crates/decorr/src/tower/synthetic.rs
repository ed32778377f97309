//! Towers with a prescribed return-time law over an independent full-shift
//! base: `branching` symbols per return-time class, and an i.i.d. cell redraw
//! at every return.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tower::{TailLaw, TowerCell, TowerKind, TowerModel};

/// Build a synthetic tower from a tail law, truncated at `cutoff` and
/// renormalized. The truncated mass is recorded on the model; construction
/// fails if it exceeds `max_truncation`.
pub fn synth_tower<R: Real>(
    law: TailLaw<R>,
    branching: u32,
    cutoff: u32,
    max_truncation: f64,
) -> Result<TowerModel<R>> {
    law.validate()?;
    if branching < 2 {
        return Err(Error::InvalidParameter(format!(
            "branching must be >= 2, got {branching}"
        )));
    }
    if cutoff < 2 {
        return Err(Error::InvalidParameter(format!(
            "cutoff must be >= 2, got {cutoff}"
        )));
    }
    let truncation = law.tail(cutoff as u64);
    if truncation.as_f64() > max_truncation {
        return Err(Error::TruncationMass {
            mass: truncation.as_f64(),
            bound: max_truncation,
        });
    }
    let norm = R::one() - truncation;
    let branch_div = R::of_usize(branching as usize);
    let mut cells = Vec::new();
    let mut prev = R::one();
    for k in 1..=cutoff {
        let t = law.tail(k as u64);
        let mass = (prev - t) / norm;
        prev = t;
        // Per-branch weight must stay positive; classes whose split
        // underflows carry no representable mass and are dropped.
        let w = mass / branch_div;
        if w > R::zero() {
            for _ in 0..branching {
                cells.push(TowerCell {
                    interval: None,
                    return_time: k,
                    weight: w,
                });
            }
        }
    }
    TowerModel::assemble(
        TowerKind::Synthetic { law, branching },
        cells,
        R::zero(),
        truncation,
        Vec::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::linear_fit;

    #[test]
    fn geometric_law_masses() {
        let t = synth_tower::<f64>(TailLaw::ExpTail { theta: 0.5 }, 2, 200, 1e-12).unwrap();
        // m{R = k} = 2^-k, split over two branches.
        for k in 1..=8u32 {
            let mass: f64 = t
                .cells()
                .iter()
                .filter(|c| c.return_time == k)
                .map(|c| c.weight)
                .sum();
            assert!((mass - 0.5f64.powi(k as i32)).abs() < 1e-12, "k={k}");
        }
        assert!((t.kac_mass() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn poly_tail_is_normalized_power_law() {
        let t = synth_tower::<f64>(TailLaw::PolyTail { alpha: 3.0 }, 2, 100_000, 1e-3).unwrap();
        let total: f64 = t.cells().iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);
        // Tail proportional to n^-3 over two decades.
        let ns: Vec<f64> = (10..1000).step_by(37).map(|n| (n as f64).ln()).collect();
        let ts: Vec<f64> = (10..1000)
            .step_by(37)
            .map(|n| t.tail_mass(n as u64).ln())
            .collect();
        let (slope, _) = linear_fit(&ns, &ts).unwrap();
        assert!((slope + 3.0).abs() < 0.05, "slope {slope}");
        assert!(t.truncation_mass() > 0.0 && t.truncation_mass() < 1e-3);
    }

    #[test]
    fn stretched_tail_shape() {
        let t =
            synth_tower::<f64>(TailLaw::StretchedTail { c: 1.0, eta: 0.5 }, 2, 2000, 1e-10)
                .unwrap();
        for &n in &[4u64, 16, 64, 256] {
            let expect = (-(n as f64).sqrt()).exp();
            let got = t.tail_mass(n);
            assert!(
                (got - expect).abs() < 1e-6 * expect.max(1e-12) + 1e-12,
                "n={n}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn truncation_budget_enforced() {
        let err = synth_tower::<f64>(TailLaw::PolyTail { alpha: 1.5 }, 2, 100, 1e-6);
        assert!(matches!(err, Err(Error::TruncationMass { .. })));
    }
}
