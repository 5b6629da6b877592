use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, DVectorView, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{db_to_linear, ModelError, Point, SystemConfig, Topology};

/// One coherence-block realisation of every channel in the system.
///
/// Direct channels are stored stacked per user: column `k` of `direct` is
/// `h_k`, whose rows `n*L .. (n+1)*L` hold `h_{n,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    n_aps: usize,
    antennas_per_ap: usize,
    direct: DMatrix<Complex64>,
    ap_to_ris: DMatrix<Complex64>,
    ris_to_user: DMatrix<Complex64>,
    blocked_links: BTreeSet<(usize, usize)>,
    noise_power_w: f64,
}

impl ChannelSet {
    /// Assembles a channel set from explicit matrices
    /// (`direct`: NL x K, `ap_to_ris`: NL x M, `ris_to_user`: M x K).
    pub fn from_parts(
        n_aps: usize,
        antennas_per_ap: usize,
        direct: DMatrix<Complex64>,
        ap_to_ris: DMatrix<Complex64>,
        ris_to_user: DMatrix<Complex64>,
        noise_power_w: f64,
    ) -> Result<Self, ModelError> {
        let nl = n_aps * antennas_per_ap;
        if direct.nrows() != nl || ap_to_ris.nrows() != nl {
            return Err(ModelError::Dimension(format!(
                "expected {nl} transmit rows, got direct {} / ap_to_ris {}",
                direct.nrows(),
                ap_to_ris.nrows()
            )));
        }
        if ris_to_user.nrows() != ap_to_ris.ncols() || ris_to_user.ncols() != direct.ncols() {
            return Err(ModelError::Dimension(format!(
                "ris_to_user is {}x{}, expected {}x{}",
                ris_to_user.nrows(),
                ris_to_user.ncols(),
                ap_to_ris.ncols(),
                direct.ncols()
            )));
        }
        if !(noise_power_w > 0.0) {
            return Err(ModelError::config("noise_power_w", "must be positive"));
        }
        Ok(Self {
            n_aps,
            antennas_per_ap,
            direct,
            ap_to_ris,
            ris_to_user,
            blocked_links: BTreeSet::new(),
            noise_power_w,
        })
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }
    pub fn antennas_per_ap(&self) -> usize {
        self.antennas_per_ap
    }
    pub fn n_users(&self) -> usize {
        self.direct.ncols()
    }
    pub fn n_elements(&self) -> usize {
        self.ap_to_ris.ncols()
    }
    pub fn total_antennas(&self) -> usize {
        self.direct.nrows()
    }
    pub fn noise_power_w(&self) -> f64 {
        self.noise_power_w
    }
    pub fn blocked_links(&self) -> &BTreeSet<(usize, usize)> {
        &self.blocked_links
    }

    /// Stacked direct channel `h_k` (length NL).
    pub fn direct(&self, k: usize) -> DVectorView<'_, Complex64> {
        self.direct.column(k)
    }

    pub fn direct_matrix(&self) -> &DMatrix<Complex64> {
        &self.direct
    }

    /// Per-AP direct channel `h_{n,k}` (length L).
    pub fn direct_link(&self, n: usize, k: usize) -> DVector<Complex64> {
        let l = self.antennas_per_ap;
        self.direct.view((n * l, k), (l, 1)).column(0).into_owned()
    }

    /// Stacked AP-to-RIS channel `H` (NL x M).
    pub fn ap_to_ris(&self) -> &DMatrix<Complex64> {
        &self.ap_to_ris
    }

    /// RIS-to-user channel `g_k` (length M).
    pub fn ris_to_user(&self, k: usize) -> DVectorView<'_, Complex64> {
        self.ris_to_user.column(k)
    }

    /// Cascaded channel `G_k = H diag(g_k)` (NL x M).
    pub fn reflect_matrix(&self, k: usize) -> DMatrix<Complex64> {
        let mut g = self.ap_to_ris.clone();
        for (m, mut col) in g.column_iter_mut().enumerate() {
            col *= self.ris_to_user[(m, k)];
        }
        g
    }

    /// Copy with every channel multiplied by `factor` on the transmit side
    /// and the noise power scaled by `factor^2`. SINRs are unchanged.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.direct *= Complex64::new(factor, 0.0);
        out.ap_to_ris *= Complex64::new(factor, 0.0);
        out.noise_power_w *= factor * factor;
        out
    }

    /// Same channels expressed in units where the noise power is one.
    pub fn noise_normalized(&self) -> Self {
        self.scaled(1.0 / self.noise_power_w.sqrt())
    }

    pub fn total_direct_energy(&self) -> f64 {
        self.direct.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// `h_k + G_k v`.
pub fn effective_channel(
    channels: &ChannelSet,
    v: &DVector<Complex64>,
    k: usize,
) -> DVector<Complex64> {
    let g = channels.ris_to_user(k);
    let weighted = g.component_mul(v);
    channels.direct(k).into_owned() + channels.ap_to_ris() * weighted
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn distance(a: &Point, b: &Point) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Element correlation `R[m, l] = sinc(2 |u_m - u_l| / lambda)`.
pub fn ris_correlation(offsets: &[Point], wavelength_m: f64) -> DMatrix<f64> {
    let m = offsets.len();
    DMatrix::from_fn(m, m, |i, j| {
        sinc(2.0 * distance(&offsets[i], &offsets[j]) / wavelength_m)
    })
}

/// Symmetric square root of a PSD matrix; negative round-off eigenvalues
/// are clipped to zero.
pub fn sqrt_psd(r: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(r.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let u = &eig.eigenvectors;
    u * DMatrix::from_diagonal(&roots) * u.transpose()
}

fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws direct Rayleigh/log-normal channels, deterministic LoS AP-RIS
/// channels and spatially correlated RIS-user channels.
///
/// Direct channels are drawn first so that the same seed yields identical
/// direct links regardless of the RIS size.
pub fn generate_channels<R: Rng + ?Sized>(
    topology: &Topology,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<ChannelSet, ModelError> {
    let (n_aps, l, k_users, m) = (
        config.n_aps,
        config.antennas_per_ap,
        config.n_users,
        config.n_ris_elements,
    );
    if topology.ap_positions_m.len() != n_aps
        || topology.user_positions_m.len() != k_users
        || topology.ris_element_offsets_m.len() != m
    {
        return Err(ModelError::Dimension(
            "topology does not match configuration dimensions".into(),
        ));
    }
    let pl = config.path_loss;
    let lambda = config.carrier_wavelength_m;
    let shadowing = Normal::new(0.0, config.shadowing_std_db)
        .map_err(|e| ModelError::config("shadowing_std_db", e.to_string()))?;

    let mut direct = DMatrix::zeros(n_aps * l, k_users);
    for n in 0..n_aps {
        for k in 0..k_users {
            let d = distance(&topology.ap_positions_m[n], &topology.user_positions_m[k]);
            let beta = pl.gain(d, pl.exponent_direct) * db_to_linear(shadowing.sample(rng));
            let amp = beta.sqrt();
            for a in 0..l {
                direct[(n * l + a, k)] = standard_complex(rng) * amp;
            }
        }
    }

    // ULA with half-wavelength spacing along x at every AP.
    let antenna_offsets: Vec<f64> = (0..l)
        .map(|a| (a as f64 - (l as f64 - 1.0) / 2.0) * lambda / 2.0)
        .collect();
    let ris = topology.ris_position_m;
    let mut ap_to_ris = DMatrix::zeros(n_aps * l, m);
    for (n, ap) in topology.ap_positions_m.iter().enumerate() {
        let d0 = distance(ap, &ris);
        let dir: Vec<f64> = (0..3).map(|i| (ris[i] - ap[i]) / d0).collect();
        let amp = pl.gain(d0, pl.exponent_ris).sqrt();
        for (a, off) in antenna_offsets.iter().enumerate() {
            for (e, u) in topology.ris_element_offsets_m.iter().enumerate() {
                let along = u[0] * dir[0] + u[1] * dir[1] + u[2] * dir[2];
                let path = d0 + along - off * dir[0];
                ap_to_ris[(n * l + a, e)] = Complex64::from_polar(amp, -2.0 * PI * path / lambda);
            }
        }
    }

    let corr_sqrt = sqrt_psd(&ris_correlation(&topology.ris_element_offsets_m, lambda))
        .map(|x| Complex64::new(x, 0.0));
    let mut ris_to_user = DMatrix::zeros(m, k_users);
    for (k, user) in topology.user_positions_m.iter().enumerate() {
        let amp = pl.gain(distance(&ris, user), pl.exponent_ris).sqrt();
        let e = DVector::from_fn(m, |_, _| standard_complex(rng));
        let g = &corr_sqrt * e * Complex64::new(amp, 0.0);
        ris_to_user.set_column(k, &g);
    }

    ChannelSet::from_parts(
        n_aps,
        l,
        direct,
        ap_to_ris,
        ris_to_user,
        config.noise_power_w,
    )
}

/// Blocks the strongest remaining direct AP-user link (ties broken by the
/// lexicographically smallest `(n, k)`).
pub fn apply_blockage(channels: &ChannelSet) -> Result<ChannelSet, ModelError> {
    let mut best: Option<((usize, usize), f64)> = None;
    for n in 0..channels.n_aps {
        for k in 0..channels.n_users() {
            if channels.blocked_links.contains(&(n, k)) {
                continue;
            }
            let energy = channels.direct_link(n, k).norm_squared();
            if best.map_or(true, |(_, e)| energy > e) {
                best = Some(((n, k), energy));
            }
        }
    }
    let ((n, k), _) = best.ok_or(ModelError::AllLinksBlocked)?;
    let mut out = channels.clone();
    let l = channels.antennas_per_ap;
    out.direct
        .view_mut((n * l, k), (l, 1))
        .fill(Complex64::new(0.0, 0.0));
    out.blocked_links.insert((n, k));
    Ok(out)
}
