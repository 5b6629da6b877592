use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, SystemConfig};

pub type Point = [f64; 3];

/// Positions of APs, users and the RIS (with its element offsets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub ap_positions_m: Vec<Point>,
    /// Quadrant index (0..4) hosting each AP.
    pub ap_quadrants: Vec<usize>,
    pub user_positions_m: Vec<Point>,
    pub ris_position_m: Point,
    /// Element offsets on the vertical x-z plane, relative to the RIS centre.
    pub ris_element_offsets_m: Vec<Point>,
}

/// Sign pattern of the quadrant centres, counter-clockwise from (+, +).
const QUADRANT_SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];

/// Planar lattice with `side` columns filled row by row until `count`
/// points exist, centred on the origin.
pub(crate) fn planar_lattice(count: usize, side: usize, spacing: f64) -> Vec<Point> {
    let rows = count.div_ceil(side.max(1));
    let cx = (side as f64 - 1.0) / 2.0;
    let cz = (rows as f64 - 1.0) / 2.0;
    (0..count)
        .map(|i| {
            let (r, c) = (i / side, i % side);
            [(c as f64 - cx) * spacing, 0.0, (r as f64 - cz) * spacing]
        })
        .collect()
}

/// Places the APs at the centres of distinct random quadrants, drops users
/// uniformly over the occupied quadrants and puts the RIS at the origin.
pub fn generate_topology<R: Rng + ?Sized>(
    config: &SystemConfig,
    rng: &mut R,
) -> Result<Topology, ModelError> {
    config.validate()?;
    let half = config.area_half_extent_m;
    let h = config.heights;

    let mut quadrants = sample(rng, 4, config.n_aps).into_vec();
    quadrants.sort_unstable();
    let ap_positions_m = quadrants
        .iter()
        .map(|&q| {
            let (sx, sy) = QUADRANT_SIGNS[q];
            [sx * half / 2.0, sy * half / 2.0, h.ap_m]
        })
        .collect();

    let user_positions_m = (0..config.n_users)
        .map(|_| {
            let q = quadrants[rng.gen_range(0..quadrants.len())];
            let (sx, sy) = QUADRANT_SIGNS[q];
            let x: f64 = rng.gen_range(0.0..half);
            let y: f64 = rng.gen_range(0.0..half);
            [sx * x, sy * y, h.user_m]
        })
        .collect();

    Ok(Topology {
        ap_positions_m,
        ap_quadrants: quadrants,
        user_positions_m,
        ris_position_m: [0.0, 0.0, h.ris_m],
        ris_element_offsets_m: planar_lattice(
            config.n_ris_elements,
            config.ris_grid_side(),
            config.element_spacing_m,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(n_aps: usize, n_users: usize) -> SystemConfig {
        let mut c = SystemConfig::reference();
        c.n_aps = n_aps;
        c.n_users = n_users;
        c.rate_targets_bps = vec![1e6; n_users];
        c.n_ris_elements = 16;
        c
    }

    fn quadrant_of(p: &Point) -> usize {
        match (p[0] >= 0.0, p[1] >= 0.0) {
            (true, true) => 0,
            (false, true) => 1,
            (false, false) => 2,
            (true, false) => 3,
        }
    }

    #[test]
    fn three_aps_on_distinct_quadrant_centres() {
        let c = small(3, 6);
        let t = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(t.ap_positions_m.len(), 3);
        let mut qs: Vec<_> = t.ap_positions_m.iter().map(quadrant_of).collect();
        for p in &t.ap_positions_m {
            assert_eq!(p[0].abs(), 250.0);
            assert_eq!(p[1].abs(), 250.0);
        }
        qs.dedup();
        assert_eq!(qs.len(), 3);
        for u in &t.user_positions_m {
            assert!(u[0].abs() <= 500.0 && u[1].abs() <= 500.0);
            assert!(t.ap_quadrants.contains(&quadrant_of(u)));
        }
    }

    #[test]
    fn single_ap_single_user() {
        let c = small(1, 1);
        let t = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(
            quadrant_of(&t.user_positions_m[0]),
            quadrant_of(&t.ap_positions_m[0])
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let c = small(3, 6);
        let a = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_more_than_four_aps() {
        let c = small(5, 2);
        assert_eq!(
            generate_topology(&c, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(ModelError::TooManyAps(5))
        );
    }

    #[test]
    fn lattice_is_square_with_spacing() {
        let pts = planar_lattice(16, 4, 0.5);
        assert_eq!(pts.len(), 16);
        assert_eq!(pts[1][0] - pts[0][0], 0.5);
        assert_eq!(pts[4][2] - pts[0][2], 0.5);
        let cx: f64 = pts.iter().map(|p| p[0]).sum();
        assert!(cx.abs() < 1e-12);
    }
}
