use ndarray::{Array1, ArrayView1};

/// Proximal operator of `tau * ||.||_2`: scales `v` by `max(0, 1 - tau / ||v||)`.
pub fn block_soft_threshold(v: ArrayView1<f64>, tau: f64) -> Array1<f64> {
    debug_assert!(tau >= 0.0);
    let norm = v.dot(&v).sqrt();
    if norm <= tau || norm == 0.0 {
        Array1::zeros(v.len())
    } else {
        let scale = 1.0 - tau / norm;
        v.mapv(|x| x * scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn closed_form_examples() {
        assert_eq!(
            block_soft_threshold(array![3.0, 4.0].view(), 2.5),
            array![1.5, 2.0]
        );
        assert_eq!(
            block_soft_threshold(array![3.0, 4.0].view(), 6.0),
            array![0.0, 0.0]
        );
        assert_eq!(
            block_soft_threshold(array![0.0, 0.0].view(), 0.0),
            array![0.0, 0.0]
        );
        assert_eq!(
            block_soft_threshold(array![0.0, 0.0].view(), 1.0),
            array![0.0, 0.0]
        );
    }

    proptest! {
        #[test]
        fn non_expansive(
            pair in (1usize..6).prop_flat_map(|n| (
                proptest::collection::vec(-10.0f64..10.0, n),
                proptest::collection::vec(-10.0f64..10.0, n),
            )),
            tau in 0.0f64..15.0,
        ) {
            let (u, v) = pair;
            let u = Array1::from(u);
            let v = Array1::from(v);
            let pu = block_soft_threshold(u.view(), tau);
            let pv = block_soft_threshold(v.view(), tau);
            let d_out = (&pu - &pv).mapv(|x| x * x).sum().sqrt();
            let d_in = (&u - &v).mapv(|x| x * x).sum().sqrt();
            prop_assert!(d_out <= d_in + 1e-12);
        }
    }
}
