use super::{GroupKind, MgaGroup, Scheme, WeightVector};

/// Weight vectors for the requested schemes, in a fixed order: extreme vectors
/// per group (minimise, then maximise), followed by multi-extreme pairs per
/// attribute and strategy.
///
/// Weights enter a minimisation, so `+1` pushes a group down and `-1` pushes it up.
pub fn build_weight_vectors(groups: &[MgaGroup], schemes: &[Scheme]) -> Vec<WeightVector> {
    let mut out = Vec::new();
    if schemes.contains(&Scheme::Extreme) {
        for g in groups {
            for (w, dir) in [(1.0, "min"), (-1.0, "max")] {
                out.push(WeightVector {
                    id: format!("E:{}:{dir}", g.id),
                    scheme: Scheme::Extreme,
                    direction: dir.to_string(),
                    weights: vec![(g.id.clone(), w)],
                });
            }
        }
    }
    if schemes.contains(&Scheme::MultiExtreme) {
        for driver in groups.iter().filter(|g| g.kind == GroupKind::Driver) {
            let Some(avoider) = groups.iter().find(|g| {
                g.kind == GroupKind::Avoider && g.attribute == driver.attribute && g.strategy == driver.strategy
            }) else {
                continue;
            };
            let attr = driver.attribute.as_deref().unwrap_or_default();
            // "decrease" pushes the driver down and the avoider up
            for (w, dir) in [(1.0, "decrease"), (-1.0, "increase")] {
                out.push(WeightVector {
                    id: format!("ME:{}:{attr}:{dir}", driver.strategy.tag()),
                    scheme: Scheme::MultiExtreme,
                    direction: dir.to_string(),
                    weights: vec![(driver.id.clone(), w), (avoider.id.clone(), -w)],
                });
            }
        }
    }
    out
}
