//! Basis point set (BPS) object encoding.
//!
//! Basis points are sampled uniformly from the volume of a ball; each point is
//! paired with the vector to its nearest point on the mesh surface. The
//! resulting `count × 3` code `G` can be reduced to `256 × 3` by a linear map
//! applied to each axis column.

use ndarray::Array2;
use rand::Rng as _;

use super::TriangleMesh;
use crate::exec::Exec;
use crate::format::Chunk;
use crate::motion::Vec3;
use crate::rng::substream;
use crate::{Error, Result};

pub const BPS_POINTS: usize = 1024;
pub const BPS_PROJECTED: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct BasisPointSet {
    pub points: Vec<Vec3>,
    pub seed: u64,
    pub radius: f64,
}

/// Uniform-in-volume samples by rejection from the bounding cube.
pub fn sample_basis_points(seed: u64, count: usize, radius: f64) -> Result<BasisPointSet> {
    if count == 0 {
        return Err(Error::invalid("basis point count must be >= 1"));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid(format!(
            "basis radius must be positive, got {radius}"
        )));
    }
    let mut rng = substream(seed, "bps");
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let p = Vec3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        if p.norm_squared() <= 1.0 {
            points.push(p * radius);
        }
    }
    Ok(BasisPointSet {
        points,
        seed,
        radius,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpsFeature {
    /// `G`: basis point → nearest surface point.
    pub vectors: Vec<Vec3>,
    /// `Ĝ`, present once a projection has been applied.
    pub projected: Option<Vec<Vec3>>,
}

impl BpsFeature {
    pub fn flatten(&self) -> Vec<f64> {
        self.vectors.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }

    /// `G` as a `count × 3` matrix.
    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.vectors.len(), 3), self.flatten())
            .expect("three columns per vector")
    }

    /// `bps` chunk for object `name`, recording the basis that produced it.
    pub fn to_chunk(&self, name: &str, basis: &BasisPointSet) -> Chunk {
        let c = Chunk::new("bps")
            .text("object", name)
            .int("basis_seed", basis.seed as i64)
            .float("basis_radius", basis.radius)
            .floats_rows("vectors", self.flatten(), 3);
        match &self.projected {
            Some(p) => c.floats_rows(
                "projected",
                p.iter().flat_map(|v| [v.x, v.y, v.z]).collect(),
                3,
            ),
            None => c,
        }
    }

    /// Object name and feature from a `bps` chunk.
    pub fn from_chunk(chunk: &Chunk) -> Result<(String, Self)> {
        if chunk.tag != "bps" {
            return Err(Error::format(format!(
                "expected a `bps` chunk, found `{}`",
                chunk.tag
            )));
        }
        let rows = |v: &[f64]| -> Result<Vec<Vec3>> {
            if v.len() % 3 != 0 {
                return Err(Error::format("bps vectors are not a multiple of 3"));
            }
            Ok(v.chunks_exact(3)
                .map(|c| Vec3::new(c[0], c[1], c[2]))
                .collect())
        };
        let vectors = rows(chunk.get_floats("vectors")?)?;
        let projected = if chunk.has("projected") {
            Some(rows(chunk.get_floats("projected")?)?)
        } else {
            None
        };
        if vectors
            .iter()
            .flat_map(|v| v.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::NonFinite("bps vectors".into()));
        }
        Ok((
            chunk.get_text("object")?.to_string(),
            Self { vectors, projected },
        ))
    }
}

pub fn encode_bps(mesh: &TriangleMesh, basis: &BasisPointSet) -> Result<BpsFeature> {
    encode_bps_with(mesh, basis, Exec::default())
}

pub fn encode_bps_with(
    mesh: &TriangleMesh,
    basis: &BasisPointSet,
    exec: Exec,
) -> Result<BpsFeature> {
    if mesh.triangles().is_empty() {
        return Err(Error::invalid("cannot encode an empty mesh"));
    }
    let vectors = exec.map(&basis.points, |b| mesh.closest_point(b).0 - b);
    Ok(BpsFeature {
        vectors,
        projected: None,
    })
}

/// Linear map `rows × cols` (row-major) applied to each axis column of `G`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometryProjection {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
}

impl GeometryProjection {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
        }
    }

    /// First `rows` rows of the `cols × cols` identity.
    pub fn identity_prefix(rows: usize, cols: usize) -> Self {
        let mut p = Self::zeros(rows, cols);
        for r in 0..rows.min(cols) {
            p.weights[r * cols + r] = 1.0;
        }
        p
    }

    /// Gaussian entries scaled by `1/sqrt(cols)`, from a fixed seed.
    pub fn random(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = substream(seed, "geometry-projection");
        let scale = 1.0 / (cols as f64).sqrt();
        let weights = (0..rows * cols)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * scale)
            .collect();
        Self {
            rows,
            cols,
            weights,
        }
    }
}

/// `Ĝ = P·G`, column-wise.
pub fn project_geometry(g: &[Vec3], projection: &GeometryProjection) -> Result<Vec<Vec3>> {
    if g.len() != projection.cols || projection.weights.len() != projection.rows * projection.cols {
        return Err(Error::shape(format!(
            "projection is {}x{} but G has {} rows",
            projection.rows,
            projection.cols,
            g.len()
        )));
    }
    Ok(projection
        .weights
        .chunks_exact(projection.cols)
        .map(|row| {
            row.iter()
                .zip(g)
                .fold(Vec3::zeros(), |acc, (w, v)| acc + v * *w)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::rotation::exp_map;
    use crate::motion::Mat3;

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let a = sample_basis_points(42, BPS_POINTS, 1.0).unwrap();
        let b = sample_basis_points(42, BPS_POINTS, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(
            a.points,
            sample_basis_points(43, BPS_POINTS, 1.0).unwrap().points
        );
        assert!(a.points.iter().all(|p| p.norm() <= 1.0));
        let big = sample_basis_points(1, 64, 2.5).unwrap();
        assert!(big.points.iter().all(|p| p.norm() <= 2.5));
    }

    #[test]
    fn uniform_ball_mean_radius() {
        // E‖p‖ = 3/4·R for the uniform ball
        let s = sample_basis_points(42, BPS_POINTS, 1.0).unwrap();
        let mean = s.points.iter().map(|p| p.norm()).sum::<f64>() / s.points.len() as f64;
        assert!((mean - 0.75).abs() <= 0.05 * 0.75, "{mean}");
    }

    #[test]
    fn chunk_round_trip() {
        let mesh = TriangleMesh::cuboid(Vec3::new(0.2, 0.1, 0.3)).unwrap();
        let basis = sample_basis_points(5, 32, 1.0).unwrap();
        let f = encode_bps(&mesh, &basis).unwrap();
        let bytes = crate::format::Container::new(vec![f.to_chunk("crate", &basis)]).to_binary();
        let c = crate::format::Container::from_binary(&bytes).unwrap();
        let (name, back) = BpsFeature::from_chunk(c.chunk("bps").unwrap()).unwrap();
        assert_eq!((name.as_str(), &back), ("crate", &f));
        assert_eq!(back.to_array().dim(), (32, 3));
        assert_eq!(back.to_array()[[7, 2]], f.vectors[7].z);
    }

    #[test]
    fn invalid_sampling_args() {
        assert!(sample_basis_points(1, 0, 1.0).is_err());
        assert!(sample_basis_points(1, 10, 0.0).is_err());
    }

    #[test]
    fn origin_inside_unit_sphere() {
        let mesh = TriangleMesh::icosphere(1.0, 3).unwrap();
        let basis = BasisPointSet {
            points: vec![Vec3::zeros()],
            seed: 0,
            radius: 1.0,
        };
        let f = encode_bps(&mesh, &basis).unwrap();
        assert!((f.vectors[0].norm() - 1.0).abs() <= 0.01);
    }

    #[test]
    fn basis_point_on_vertex_is_zero() {
        let mesh = TriangleMesh::icosphere(1.0, 1).unwrap();
        let basis = BasisPointSet {
            points: vec![mesh.vertices()[3]],
            seed: 0,
            radius: 1.0,
        };
        assert_eq!(encode_bps(&mesh, &basis).unwrap().vectors[0], Vec3::zeros());
    }

    #[test]
    fn translation_covariance_single_triangle() {
        let tri = TriangleMesh::new(
            vec![
                Vec3::new(0.1, 0.0, 0.0),
                Vec3::new(0.6, 0.2, 0.1),
                Vec3::new(0.0, 0.5, -0.2),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let [a, b, c] = tri.triangle(0);
        let basis = sample_basis_points(3, 128, 1.0).unwrap();
        let t = Vec3::new(0.3, -0.2, 0.15);
        let moved = encode_bps(&tri.translated(&t), &basis).unwrap();
        for (p, v) in basis.points.iter().zip(&moved.vectors) {
            // nearest point on mesh+t is t + nearest point of (p - t) on the mesh
            let c_shift = super::super::closest_point_on_triangle(&(p - t), &a, &b, &c);
            assert!((v - (c_shift + t - p)).norm() < 1e-12);
        }
        // moving basis and mesh together leaves G unchanged
        let shifted_basis = BasisPointSet {
            points: basis.points.iter().map(|p| p + t).collect(),
            ..basis.clone()
        };
        let g0 = encode_bps(&tri, &basis).unwrap();
        let g1 = encode_bps(&tri.translated(&t), &shifted_basis).unwrap();
        for (v0, v1) in g0.vectors.iter().zip(&g1.vectors) {
            assert!((v0 - v1).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_covariance() {
        let mesh = TriangleMesh::cuboid(Vec3::new(0.3, 0.2, 0.1)).unwrap();
        let basis = sample_basis_points(9, 64, 1.0).unwrap();
        let r: Mat3 = exp_map(&Vec3::new(0.2, 0.7, -0.4));
        let rotated_mesh = TriangleMesh::new(
            mesh.vertices().iter().map(|v| r * v).collect(),
            mesh.triangles().to_vec(),
        )
        .unwrap();
        let rotated_basis = BasisPointSet {
            points: basis.points.iter().map(|p| r * p).collect(),
            ..basis.clone()
        };
        let g = encode_bps(&mesh, &basis).unwrap();
        let gr = encode_bps(&rotated_mesh, &rotated_basis).unwrap();
        for (a, b) in g.vectors.iter().zip(&gr.vectors) {
            assert!((r * a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn nearest_is_no_farther_than_any_vertex() {
        let mesh = TriangleMesh::icosphere(0.4, 2).unwrap();
        let basis = sample_basis_points(11, 256, 1.0).unwrap();
        let g = encode_bps(&mesh, &basis).unwrap();
        for (b, v) in basis.points.iter().zip(&g.vectors) {
            let min_vertex = mesh
                .vertices()
                .iter()
                .map(|x| (x - b).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(v.norm() <= min_vertex + 1e-12);
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mesh = TriangleMesh::icosphere(0.5, 2).unwrap();
        let basis = sample_basis_points(5, 300, 1.0).unwrap();
        let a = encode_bps_with(&mesh, &basis, Exec::Sequential).unwrap();
        let b = encode_bps_with(&mesh, &basis, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn projection_properties() {
        let basis = sample_basis_points(2, BPS_POINTS, 1.0).unwrap();
        let mesh = TriangleMesh::cuboid(Vec3::new(0.3, 0.2, 0.1)).unwrap();
        let g = encode_bps(&mesh, &basis).unwrap().vectors;
        let id = GeometryProjection::identity_prefix(BPS_PROJECTED, BPS_POINTS);
        assert_eq!(
            project_geometry(&g, &id).unwrap(),
            g[..BPS_PROJECTED].to_vec()
        );
        let zero = GeometryProjection::zeros(BPS_PROJECTED, BPS_POINTS);
        assert!(project_geometry(&g, &zero)
            .unwrap()
            .iter()
            .all(|v| *v == Vec3::zeros()));

        let p = GeometryProjection::random(BPS_PROJECTED, BPS_POINTS, 4);
        let g2: Vec<Vec3> = basis.points.clone();
        let (a, b) = (0.7, -1.3);
        let mix: Vec<Vec3> = g.iter().zip(&g2).map(|(x, y)| x * a + y * b).collect();
        let lhs = project_geometry(&mix, &p).unwrap();
        let r1 = project_geometry(&g, &p).unwrap();
        let r2 = project_geometry(&g2, &p).unwrap();
        for i in 0..BPS_PROJECTED {
            assert!((lhs[i] - (r1[i] * a + r2[i] * b)).norm() < 1e-9);
        }
        assert!(project_geometry(&g[..10], &p).is_err());
    }
}
