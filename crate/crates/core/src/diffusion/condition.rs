use std::sync::Arc;

use ndarray::{Array1, Array2};

use super::tensor::{Normalizer, SlotState, WindowLayout};
use crate::format::Chunk;
use crate::motion::{Vec3, OBJECT_DIM};
use crate::rng::fnv1a;
use crate::{Error, Result};

/// Default text embedding width.
pub const TEXT_DIM: usize = 512;

/// Deterministic bag-of-words embedding: lowercase alphanumeric tokens are
/// hashed into `dim` buckets and the count vector is L2-normalized. An empty
/// prompt maps to the zero vector.
pub fn toy_text_embed(prompt: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    if dim == 0 {
        return v;
    }
    for token in prompt
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        let h = fnv1a(token.to_lowercase().as_bytes());
        v[(h % dim as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Conditions of one window: object geometry, masked motion and text.
///
/// The masked motion is stored unnormalized in the canonical frame (xy shifted
/// by the initial object position). Each row is `[object 12 | human D]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionBundle {
    /// Basis-point vectors of the object (`points × 3`); projected inside the denoiser.
    pub geometry: Arc<Array2<f64>>,
    pub masked: Array2<f64>,
    pub mask: Array2<f64>,
    pub text: Vec<f64>,
    pub shift: [f64; 2],
}

/// Masked-motion assembly: `prefix` states fill the first slots completely,
/// each waypoint fixes the object's (x, y) at its slot and the target fixes
/// the object's (x, y, z). Everything else stays zero with mask 0.
pub fn build_condition(
    geometry: Arc<Array2<f64>>,
    layout: &WindowLayout,
    prefix: &[SlotState],
    waypoints: &[(usize, [f64; 2])],
    target: Option<(usize, Vec3)>,
    text: Vec<f64>,
) -> Result<ConditionBundle> {
    let first = prefix
        .first()
        .ok_or_else(|| Error::invalid("condition needs an initial state"))?;
    if prefix.len() > layout.slots {
        return Err(Error::invalid(format!(
            "{} prefix states for {} slots",
            prefix.len(),
            layout.slots
        )));
    }
    if geometry.ncols() != 3 || geometry.nrows() == 0 {
        return Err(Error::shape(format!(
            "geometry must be N×3, got {:?}",
            geometry.dim()
        )));
    }
    if waypoints.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::invalid("waypoints must be sorted by slot"));
    }
    if let Some((s, _)) = waypoints.iter().find(|(s, _)| *s >= layout.slots) {
        return Err(Error::invalid(format!(
            "waypoint slot {s} outside window of {} slots",
            layout.slots
        )));
    }
    if let Some((s, _)) = target.filter(|(s, _)| *s >= layout.slots) {
        return Err(Error::invalid(format!(
            "target slot {s} outside window of {} slots",
            layout.slots
        )));
    }
    let shift = [first.object.position.x, first.object.position.y];
    let c = layout.cond_dim();
    let mut masked = Array2::zeros((layout.slots, c));
    let mut mask = Array2::zeros((layout.slots, c));
    for (s, st) in prefix.iter().enumerate() {
        let mut obj = st.object.flatten();
        obj[0] -= shift[0];
        obj[1] -= shift[1];
        let mut human = st.pose.flatten();
        if human.len() < layout.pose_dim() {
            return Err(Error::shape("prefix pose does not match the layout"));
        }
        human.truncate(layout.pose_dim());
        human[0] -= shift[0];
        human[1] -= shift[1];
        for (k, v) in obj.iter().chain(&human).enumerate() {
            masked[[s, k]] = *v;
            mask[[s, k]] = 1.0;
        }
    }
    for (s, xy) in waypoints {
        masked[[*s, 0]] = xy[0] - shift[0];
        masked[[*s, 1]] = xy[1] - shift[1];
        mask[[*s, 0]] = 1.0;
        mask[[*s, 1]] = 1.0;
    }
    if let Some((s, p)) = target {
        for (k, v) in [p.x - shift[0], p.y - shift[1], p.z]
            .into_iter()
            .enumerate()
        {
            masked[[s, k]] = v;
            mask[[s, k]] = 1.0;
        }
    }
    Ok(ConditionBundle {
        geometry,
        masked,
        mask,
        text,
        shift,
    })
}

/// Normalized condition tensors as consumed by a denoiser.
#[derive(Clone, Debug)]
pub struct EncodedCondition {
    pub masked: Array2<f64>,
    pub mask: Array2<f64>,
    pub text: Array1<f64>,
    pub geometry: Arc<Array2<f64>>,
}

impl ConditionBundle {
    pub fn slots(&self) -> usize {
        self.masked.nrows()
    }

    /// Number of slots with at least one unmasked entry.
    pub fn conditioned_slots(&self) -> usize {
        self.mask
            .rows()
            .into_iter()
            .filter(|r| r.iter().any(|&m| m != 0.0))
            .count()
    }

    /// Normalizes the unmasked entries with the statistics of the matching
    /// sample features; masked-out entries are zero regardless of stored values.
    pub fn encode(
        &self,
        normalizer: &Normalizer,
        layout: &WindowLayout,
    ) -> Result<EncodedCondition> {
        if self.masked.dim() != (layout.slots, layout.cond_dim())
            || self.mask.dim() != self.masked.dim()
        {
            return Err(Error::shape(format!(
                "condition is {:?}, layout expects ({}, {})",
                self.masked.dim(),
                layout.slots,
                layout.cond_dim()
            )));
        }
        if normalizer.dim() != layout.feature_dim() {
            return Err(Error::shape("normalizer does not match the layout"));
        }
        let mut s = Array2::zeros(self.masked.dim());
        for ((i, k), m) in self.mask.indexed_iter() {
            if *m != 0.0 {
                let f = layout.cond_to_feature(k);
                s[[i, k]] = (self.masked[[i, k]] - normalizer.mean[f]) / normalizer.std[f];
            }
        }
        Ok(EncodedCondition {
            masked: s,
            mask: self.mask.clone(),
            text: Array1::from(self.text.clone()),
            geometry: self.geometry.clone(),
        })
    }

    pub fn to_chunk(&self) -> Chunk {
        let (l, c) = self.masked.dim();
        Chunk::new("condition")
            .int("slots", l as i64)
            .int("cond_dim", c as i64)
            .floats_rows("masked", self.masked.iter().copied().collect(), c)
            .ints(
                "mask",
                self.mask.iter().map(|&m| (m != 0.0) as i64).collect(),
            )
            .floats("text", self.text.clone())
            .floats("shift", self.shift.to_vec())
            .floats_rows("geometry", self.geometry.iter().copied().collect(), 3)
    }

    pub fn from_chunk(chunk: &Chunk) -> Result<Self> {
        if chunk.tag != "condition" {
            return Err(Error::format(format!(
                "expected a `condition` chunk, found `{}`",
                chunk.tag
            )));
        }
        let l = chunk.get_usize("slots")?;
        let c = chunk.get_usize("cond_dim")?;
        if c < OBJECT_DIM {
            return Err(Error::format("condition width too small"));
        }
        let masked =
            Array2::from_shape_vec((l, c), chunk.get_floats_len("masked", l * c)?.to_vec())
                .map_err(|e| Error::format(e.to_string()))?;
        let mask_vals = chunk.get_ints("mask")?;
        if mask_vals.len() != l * c {
            return Err(Error::format("condition mask has the wrong size"));
        }
        let mask = Array2::from_shape_vec(
            (l, c),
            mask_vals.iter().map(|&m| (m != 0) as i64 as f64).collect(),
        )
        .map_err(|e| Error::format(e.to_string()))?;
        let g = chunk.get_floats("geometry")?;
        if g.is_empty() || g.len() % 3 != 0 {
            return Err(Error::format("geometry must hold N×3 values"));
        }
        let geometry = Array2::from_shape_vec((g.len() / 3, 3), g.to_vec())
            .map_err(|e| Error::format(e.to_string()))?;
        let shift = match chunk.get_floats("shift")? {
            [x, y] => [*x, *y],
            _ => return Err(Error::format("shift must have 2 values")),
        };
        Ok(Self {
            geometry: Arc::new(geometry),
            masked,
            mask,
            text: chunk.get_floats("text")?.to_vec(),
            shift,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::Container;
    use crate::motion::{ObjectPose, PoseFrame};

    fn state(x: f64, y: f64) -> SlotState {
        SlotState {
            pose: PoseFrame {
                root_translation: Vec3::new(x, y, 0.9),
                ..PoseFrame::rest(2)
            },
            object: ObjectPose::identity_at(Vec3::new(x + 0.5, y, 1.0)),
        }
    }

    fn geometry() -> Arc<Array2<f64>> {
        Arc::new(Array2::from_shape_fn((8, 3), |(i, k)| {
            (i * 3 + k) as f64 * 0.01
        }))
    }

    #[test]
    fn text_embedding_rules() {
        assert!(toy_text_embed("", 64).iter().all(|&x| x == 0.0));
        let a = toy_text_embed("lift the box", TEXT_DIM);
        assert_eq!(a, toy_text_embed("lift the box", TEXT_DIM));
        assert_eq!(a, toy_text_embed("lift the box ", TEXT_DIM));
        assert_eq!(a, toy_text_embed("Lift  THE box!", TEXT_DIM));
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(a, toy_text_embed("push the box", TEXT_DIM));
    }

    #[test]
    fn mask_counting() {
        let layout = WindowLayout::new(2, 6).unwrap();
        let c = build_condition(
            geometry(),
            &layout,
            &[state(1.0, 2.0)],
            &[],
            Some((5, Vec3::new(3.0, 2.0, 0.8))),
            vec![],
        )
        .unwrap();
        assert_eq!(c.conditioned_slots(), 2);
        assert_eq!(c.masked[[5, 0]], 3.0 - 1.5);
        assert_eq!(c.masked[[0, 0]], 0.0);
        assert_eq!(c.masked[[0, 12]], 1.0 - 1.5);
        let wps = [(2, [2.0, 2.0]), (3, [2.5, 2.0])];
        let c = build_condition(
            geometry(),
            &layout,
            &[state(1.0, 2.0)],
            &wps,
            Some((5, Vec3::zeros())),
            vec![],
        )
        .unwrap();
        assert_eq!(c.conditioned_slots(), 1 + 2 + 1);
        assert_eq!(c.mask.row(2).sum(), 2.0);
        assert!(build_condition(
            geometry(),
            &layout,
            &[state(0.0, 0.0)],
            &[(6, [0.0, 0.0])],
            None,
            vec![]
        )
        .is_err());
        assert!(build_condition(
            geometry(),
            &layout,
            &[state(0.0, 0.0)],
            &wps[..].iter().rev().copied().collect::<Vec<_>>(),
            None,
            vec![]
        )
        .is_err());
        assert!(build_condition(geometry(), &layout, &[], &[], None, vec![]).is_err());
    }

    #[test]
    fn encode_ignores_masked_values() {
        let layout = WindowLayout::new(2, 4).unwrap();
        let c = build_condition(
            geometry(),
            &layout,
            &[state(1.0, 2.0)],
            &[(2, [1.0, 1.0])],
            None,
            vec![0.5; 4],
        )
        .unwrap();
        let norm = Normalizer::identity(layout.feature_dim());
        let a = c.encode(&norm, &layout).unwrap();
        let mut d = c.clone();
        d.masked[[3, 5]] = 42.0;
        let b = d.encode(&norm, &layout).unwrap();
        assert_eq!(a.masked, b.masked);
    }

    #[test]
    fn bundle_round_trip() {
        let layout = WindowLayout::new(2, 4).unwrap();
        let c = build_condition(
            geometry(),
            &layout,
            &[state(1.0, 2.0), state(1.1, 2.2)],
            &[(2, [1.0, 1.0 / 3.0])],
            Some((3, Vec3::new(0.1, 0.2, 0.3))),
            toy_text_embed("carry", 16),
        )
        .unwrap();
        let bytes = Container::new(vec![c.to_chunk()]).to_binary();
        let back = ConditionBundle::from_chunk(
            Container::decode(&bytes)
                .unwrap()
                .chunk("condition")
                .unwrap(),
        )
        .unwrap();
        assert_eq!(back, c);
    }
}
