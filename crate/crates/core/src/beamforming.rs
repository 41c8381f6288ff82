//! Zero-forcing beams built from the strongest user of each cluster.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};

#[derive(Debug, Clone)]
pub struct BeamformerSet {
    /// Unit-norm beam per cluster (length M).
    pub beams: Vec<CVector>,
    /// Orthonormal basis (M×r) of the space each beam is confined to.
    pub null_bases: Vec<CMatrix>,
}

/// For cluster i, confines f_i to the null space of the other clusters'
/// strongest-user channels and aligns it with its own: f_i ∝ Q Qᴴ u_{i,K}ᴴ.
pub fn build_zf_beamformers(strongest: &[CVector]) -> Result<BeamformerSet> {
    let num_clusters = strongest.len();
    let m = strongest
        .first()
        .ok_or_else(|| Error::invalid("no clusters to beamform"))?
        .len();
    if strongest.iter().any(|u| u.len() != m) {
        return Err(Error::invalid("strongest-user channels differ in length"));
    }
    let mut beams = Vec::with_capacity(num_clusters);
    let mut null_bases = Vec::with_capacity(num_clusters);
    for i in 0..num_clusters {
        let others: Vec<&CVector> = (0..num_clusters).filter(|&j| j != i).map(|j| &strongest[j]).collect();
        let q = null_space(&others, m).ok_or(Error::EmptyNullSpace { cluster: i })?;
        let target = strongest[i].conjugate();
        let projected = &q * q.ad_mul(&target);
        let norm = projected.norm();
        if !(norm > 1e-12 * target.norm()) {
            return Err(Error::EmptyNullSpace { cluster: i });
        }
        beams.push(projected / C64::from(norm));
        null_bases.push(q);
    }
    Ok(BeamformerSet { beams, null_bases })
}

/// Orthonormal basis of {f : u_j f = 0 for every row u_j}, or `None` if that
/// space is trivial. Rank is decided at max(M, rows)·ε·σ_max.
fn null_space(rows: &[&CVector], m: usize) -> Option<CMatrix> {
    if rows.is_empty() {
        return Some(CMatrix::identity(m, m));
    }
    // Pad with zero rows so the SVD returns a full M×M right factor.
    let height = rows.len().max(m);
    let mut a = CMatrix::zeros(height, m);
    for (r, u) in rows.iter().enumerate() {
        a.set_row(r, &u.transpose());
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    let tol = height.max(m) as f64 * f64::EPSILON * sigma_max;
    let null_rows: Vec<usize> = (0..sigma.len()).filter(|&r| sigma[r] <= tol).collect();
    if null_rows.is_empty() {
        return None;
    }
    let mut q = CMatrix::zeros(m, null_rows.len());
    for (c, &r) in null_rows.iter().enumerate() {
        q.set_column(c, &v_t.row(r).adjoint());
    }
    Some(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(v: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&(r, i)| C64::new(r, i)))
    }

    #[test]
    fn orthogonal_users_get_their_own_axes() {
        let set = build_zf_beamformers(&[cv(&[(1.0, 0.0), (0.0, 0.0)]), cv(&[(0.0, 0.0), (1.0, 0.0)])]).unwrap();
        assert!((set.beams[0][0].norm() - 1.0).abs() < 1e-15 && set.beams[0][1].norm() < 1e-15);
        assert!((set.beams[1][1].norm() - 1.0).abs() < 1e-15 && set.beams[1][0].norm() < 1e-15);
    }

    #[test]
    fn single_cluster_gets_matched_filter() {
        let u = cv(&[(1.0, 1.0), (0.0, 2.0)]);
        let set = build_zf_beamformers(std::slice::from_ref(&u)).unwrap();
        let want = u.conjugate() / C64::from(u.norm());
        assert!((&set.beams[0] - want).norm() < 1e-14);
    }

    #[test]
    fn too_few_antennas_rejected() {
        let u = [cv(&[(1.0, 0.0)]), cv(&[(2.0, 0.0)])];
        assert!(matches!(build_zf_beamformers(&u), Err(Error::EmptyNullSpace { cluster: 0 })));
    }

    #[test]
    fn collinear_target_rejected() {
        // M = 3 but cluster 0's own channel lies in the span of the others.
        let u = [
            cv(&[(1.0, 0.0), (1.0, 0.0), (0.0, 0.0)]),
            cv(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]),
            cv(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]),
        ];
        let err = build_zf_beamformers(&u).unwrap_err();
        assert!(matches!(err, Error::EmptyNullSpace { cluster: 0 }), "{err}");
    }
}
