use std::cmp::Ordering;

use rand::Rng;

use crate::model::Ratio;

/// Routing rule: the endpoint with the smaller relative load `q/p` wins,
/// exact ties are broken by a fair coin.
///
/// The comparison `q_i/p_i` vs `q_j/p_j` is done by cross-multiplying the
/// exact rational weights in 128-bit integers.
pub fn route<R: Rng + ?Sized>(q: &[u64], i: usize, j: usize, w: &[Ratio], rng: &mut R) -> usize {
    if i == j {
        return i;
    }
    let lhs = q[i] as u128 * w[i].den as u128 * w[j].num as u128;
    let rhs = q[j] as u128 * w[j].den as u128 * w[i].num as u128;
    match lhs.cmp(&rhs) {
        Ordering::Less => i,
        Ordering::Greater => j,
        Ordering::Equal => {
            if rng.random::<bool>() {
                i
            } else {
                j
            }
        }
    }
}
