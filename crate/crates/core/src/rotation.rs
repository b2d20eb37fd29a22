//! SO(3) utilities for Bloch-sphere tomography: orthogonal Procrustes
//! fitting, axis–angle extraction, and Rodrigues reconstruction.

use nalgebra::{Matrix3, Vector3};

use crate::error::{DqdError, Result};

/// Best proper rotation mapping each `initial` vector onto its `final`
/// partner in the least-squares sense: maximise tr(Rᵀ·B) with
/// B = Σ fᵢ·iᵢᵀ via SVD, forcing det R = +1. Returns (R, misfit) where
/// misfit = √Σ‖R·iᵢ − fᵢ‖².
pub fn procrustes(initials: &[Vector3<f64>], finals: &[Vector3<f64>]) -> Result<(Matrix3<f64>, f64)> {
    assert_eq!(initials.len(), finals.len());
    assert!(initials.len() >= 3, "need at least three vector pairs");
    let mut b = Matrix3::zeros();
    for (i, f) in initials.iter().zip(finals) {
        b += f * i.transpose();
    }
    let svd = b.svd(true, true);
    let u = svd.u.expect("svd with u requested");
    let v_t = svd.v_t.expect("svd with v_t requested");
    // a vanishing third singular value means the image vectors span less
    // than three dimensions: the constrained fit is no longer unique
    if svd.singular_values[2] < 1e-6 {
        return Err(DqdError::DegenerateProbes(format!(
            "final Bloch vectors are nearly coplanar/collinear (σ₃ = {:.3e})",
            svd.singular_values[2]
        )));
    }
    let det = (u * v_t).determinant();
    let r = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum())) * v_t;
    let misfit = initials
        .iter()
        .zip(finals)
        .map(|(i, f)| (r * i - f).norm_squared())
        .sum::<f64>()
        .sqrt();
    Ok((r, misfit))
}

/// Nearest proper rotation to an arbitrary 3×3 matrix (polar projection).
pub fn project_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd with u requested");
    let v_t = svd.v_t.expect("svd with v_t requested");
    let det = (u * v_t).determinant();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum())) * v_t
}

/// Axis and angle of a proper rotation, right-hand rule, angle ∈ [0, π]
/// (the axis flips sign as needed to keep the angle non-negative).
pub fn axis_angle(r: &Matrix3<f64>) -> (Vector3<f64>, f64) {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = cos.acos();
    // skew part: R − Rᵀ = 2·sinθ·[n]×
    let ax = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if angle < 1e-7 {
        // no rotation to speak of; report a fixed axis for reproducibility
        return (Vector3::z(), angle);
    }
    if std::f64::consts::PI - angle > 1e-4 {
        return (ax / (2.0 * angle.sin()), angle);
    }
    // near π the skew part vanishes; use R + I = 2·n̂n̂ᵀ + (1+cosθ)(…) → the
    // dominant column of R + I is parallel to n̂
    let m = r + Matrix3::identity();
    let col = (0..3)
        .map(|j| m.column(j).into_owned())
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap();
    let mut n = col.normalize();
    // fix the sign against the (small but usually nonzero) skew part
    if n.dot(&ax) < 0.0 {
        n = -n;
    }
    (n, angle)
}

/// Rodrigues: rotation by `angle` about unit `axis`.
pub fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let n = axis.normalize();
    let k = skew(&n);
    Matrix3::identity() + angle.sin() * k + (1.0 - angle.cos()) * (k * k)
}

/// [n]× cross-product matrix.
pub fn skew(n: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -n.z, n.y, n.z, 0.0, -n.x, -n.y, n.x, 0.0)
}

/// Angle between two unit-ish vectors, in radians.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
}
