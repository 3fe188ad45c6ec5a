use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::Field;

/// Fields with at most this many inside cells get the exact pairwise max.
pub const EXACT_DIAMETER_CELLS: usize = 64 * 64;

const SAMPLED_PAIRS: usize = 4096;

/// `max_{x,y} dist_g(u(x), u(y))` over inside cells. Exact for small fields;
/// otherwise a max over random pairs refined by farthest-point sweeps, which
/// is a lower bound.
pub fn geodesic_diameter(u: &Field) -> f64 {
    let cells = u.domain().inside_cells();
    let man = u.manifold();
    let q = cells.len();
    let val = |i: usize| u.value(cells[i] as usize);
    if q <= EXACT_DIAMETER_CELLS {
        let mut best = 0.0f64;
        for i in 0..q {
            let p = val(i);
            for j in i + 1..q {
                best = best.max(man.distance(p, val(j)));
            }
        }
        return best;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut b, mut best) = (0, 0.0f64);
    for _ in 0..SAMPLED_PAIRS {
        let i = rng.random_range(0..q);
        let j = rng.random_range(0..q);
        let d = man.distance(val(i), val(j));
        if d > best {
            (b, best) = (j, d);
        }
    }
    loop {
        let far = |from: usize| {
            (0..q)
                .map(|j| (j, man.distance(val(from), val(j))))
                .fold((from, 0.0f64), |acc, x| if x.1 > acc.1 { x } else { acc })
        };
        let (c, d) = far(b);
        if d <= best {
            break;
        }
        (b, best) = (c, d);
    }
    best
}
