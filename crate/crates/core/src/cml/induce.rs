use nalgebra::DMatrix;

use super::{Boundary, EndpointSpec, InteriorTriple};
use crate::error::{Error, Result};
use crate::gaussian::{spd_inverse, spd_solve, symmetrize};
use crate::markov::MarkovModelParams;

/// Interior triples of the CM_L model induced by a Markov model.
///
/// For `k` in `[1, N-1]`:
///
/// ```text
/// G_k       = (M_k⁻¹ + M_{N|k}ᵀ C_{N|k}⁻¹ M_{N|k})⁻¹
/// G_{k,N}   = G_k M_{N|k}ᵀ C_{N|k}⁻¹
/// G_{k,k-1} = M_{k,k-1} - G_{k,N} M_{N|k-1}
/// ```
pub fn induce_cml(markov: &MarkovModelParams) -> Result<Vec<InteriorTriple>> {
    let n = markov.horizon();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("horizon {n} < 2")));
    }
    let tp = markov.terminal_propagation();
    (1..n)
        .map(|k| {
            let gain = tp.gain(k);
            // C_{N|k}⁻¹ M_{N|k}
            let whitened = spd_solve(tp.cov(k), gain, &format!("C_{{N|{k}}}"))?;
            let info = spd_inverse(markov.noise_cov(k), &format!("M_{k}"))?
                + gain.transpose() * &whitened;
            let noise_cov = spd_inverse(&symmetrize(&info), &format!("G_{k} precision"))?;
            let destination_gain = &noise_cov * whitened.transpose();
            let transition = markov.transition(k) - &destination_gain * tp.gain(k - 1);
            Ok(InteriorTriple {
                transition,
                destination_gain,
                noise_cov,
            })
        })
        .collect()
}

/// Boundary parameters reproducing an endpoint joint density:
/// `G_{0,N} = C_{0,N} C_N⁻¹`, `G_0 = C_0 - C_{0,N} C_N⁻¹ C_{0,N}ᵀ`,
/// `G_N = C_N`.
pub fn boundary_from_endpoints(spec: &EndpointSpec) -> Result<Boundary> {
    let c_n = spec.destination().cov();
    let c_0n = spec.cross_cov();
    // (C_N⁻¹ C_{0,N}ᵀ)ᵀ = C_{0,N} C_N⁻¹ since C_N is symmetric.
    let origin_gain: DMatrix<f64> = spd_solve(c_n, &c_0n.transpose(), "C_N")?.transpose();
    let origin_noise = symmetrize(&(spec.origin().cov() - &origin_gain * c_0n.transpose()));
    crate::gaussian::spd_factor(&origin_noise, "G_0")?;
    Ok(Boundary {
        origin_gain,
        origin_noise,
        destination_cov: c_n.clone(),
        origin_mean: spec.origin().mean().clone(),
        destination_mean: spec.destination().mean().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianDensity;
    use nalgebra::dmatrix;

    fn walk(n: usize) -> MarkovModelParams {
        MarkovModelParams::time_invariant(
            dmatrix![1.0],
            dmatrix![1.0],
            n,
            GaussianDensity::diagonal(&[0.0], &[1.0]).unwrap(),
        )
        .unwrap()
    }

    fn scalar(t: &InteriorTriple) -> (f64, f64, f64) {
        (
            t.transition[(0, 0)],
            t.destination_gain[(0, 0)],
            t.noise_cov[(0, 0)],
        )
    }

    fn close(a: (f64, f64, f64), b: (f64, f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12 && (a.2 - b.2).abs() < 1e-12
    }

    // Expected triples below were computed with the Bayes oracle
    // (conditioning the joint of s_k, s_N given s_{k-1}); see
    // `oracle::tests::bayes_oracle_scalar_walks`.
    #[test]
    fn scalar_walk_triples() {
        let t = induce_cml(&walk(2)).unwrap();
        assert_eq!(t.len(), 1);
        assert!(close(scalar(&t[0]), (0.5, 0.5, 0.5)));

        let t = induce_cml(&walk(3)).unwrap();
        assert!(close(scalar(&t[0]), (2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0)));
        assert!(close(scalar(&t[1]), (0.5, 0.5, 0.5)));
    }

    #[test]
    fn last_step_uses_one_term_base_case() {
        let markov = walk(1 + 4);
        let n = markov.horizon();
        let t = induce_cml(&markov).unwrap();
        let last = &t[n - 2];
        // With M_{N|N-1} = M_{N,N-1} = 1 and C_{N|N-1} = M_N = 1.
        let g = 1.0 / (1.0 + 1.0);
        assert!((last.noise_cov[(0, 0)] - g).abs() < 1e-14);
        assert!((last.destination_gain[(0, 0)] - g).abs() < 1e-14);
    }

    #[test]
    fn boundary_examples() {
        let one = GaussianDensity::diagonal(&[0.0], &[1.0]).unwrap();
        let b = boundary_from_endpoints(&EndpointSpec::independent(one.clone(), one.clone()).unwrap())
            .unwrap();
        assert_eq!(b.origin_gain[(0, 0)], 0.0);
        assert_eq!(b.origin_noise[(0, 0)], 1.0);
        assert_eq!(b.destination_cov[(0, 0)], 1.0);

        let rho = 0.6;
        let spec = EndpointSpec::new(one.clone(), one.clone(), dmatrix![rho]).unwrap();
        let b = boundary_from_endpoints(&spec).unwrap();
        assert!((b.origin_gain[(0, 0)] - rho).abs() < 1e-15);
        assert!((b.origin_noise[(0, 0)] - (1.0 - rho * rho)).abs() < 1e-15);

        let paper = EndpointSpec::independent(
            GaussianDensity::diagonal(&[2000.0, 70.0, 5000.0, 0.0], &[1000.0, 10.0, 1000.0, 10.0])
                .unwrap(),
            GaussianDensity::diagonal(&[130000.0, 70.0, 10000.0, 0.0], &[1000.0, 10.0, 1000.0, 10.0])
                .unwrap(),
        )
        .unwrap();
        let b = boundary_from_endpoints(&paper).unwrap();
        assert_eq!(b.origin_gain, DMatrix::zeros(4, 4));
        assert_eq!(&b.origin_noise, paper.origin().cov());
        assert_eq!(&b.destination_cov, paper.destination().cov());
    }

    #[test]
    fn perfect_coupling_is_rejected() {
        let one = GaussianDensity::diagonal(&[0.0], &[1.0]).unwrap();
        // The spec constructor already refuses the singular joint.
        assert!(matches!(
            EndpointSpec::new(one.clone(), one, dmatrix![1.0]),
            Err(Error::NotPositiveDefinite(_))
        ));
    }
}
