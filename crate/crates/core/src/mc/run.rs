//! Experiment driver: samplers, sample-parallel runs and merging.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ising::{sw_ising_sample, IsingState};
use super::lattice::{BondLattice, SiteLattice};
use super::walk::{bond_sample, bond_state, site_sample, site_state, Preset, Stream, WalkState, WalkTrace};
use super::{
    tally, Connectivity, LatticeSpec, Model, TallySet, BURN_IN_PER_SIZE, CHAIN_LEN, CHUNK, ISING_STREAM,
    SWEEPS_PER_SAMPLE,
};
use crate::{Error, Result};

#[derive(Debug, Clone)]
enum Engine {
    Bond(BondLattice),
    Site(SiteLattice),
}

/// One worker's lattice, walk state and tallies.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: LatticeSpec,
    engine: Engine,
    state: WalkState,
    pub tallies: TallySet,
}

impl Sampler {
    pub fn new(spec: &LatticeSpec) -> Result<Sampler> {
        spec.validate()?;
        let (engine, state) = if spec.model == Model::SitePerc {
            let lat = SiteLattice::new(spec.linear_size());
            let st = site_state(&lat);
            (Engine::Site(lat), st)
        } else {
            let lat = BondLattice::new(spec);
            let st = bond_state(&lat);
            (Engine::Bond(lat), st)
        };
        let (w, h) = spec.grid_dims();
        Ok(Sampler { spec: *spec, engine, state, tallies: TallySet::new(w, h, &spec.labels()) })
    }

    pub fn traces(&self) -> &[WalkTrace] {
        &self.state.traces
    }

    /// Walks of percolation sample `index`, not tallied.
    pub fn percolation_walks(&mut self, seed: u64, index: u64) -> Connectivity {
        let mut src = Stream::new(seed, index, self.spec.p_c);
        match &self.engine {
            Engine::Bond(lat) => bond_sample(lat, &mut self.state, &mut src),
            Engine::Site(lat) => site_sample(lat, &mut self.state, &mut src),
        }
        .expect("random source never runs dry")
    }

    /// Walks over a complete FK configuration, not tallied.
    pub fn fk_walks(&mut self, bonds: &[bool]) -> Connectivity {
        match &self.engine {
            Engine::Bond(lat) => bond_sample(lat, &mut self.state, &mut Preset(bonds)).expect("preset is complete"),
            Engine::Site(_) => unreachable!("FK walks run on bond lattices"),
        }
    }

    fn record(&mut self) {
        tally(&self.state.traces, &mut self.tallies);
    }

    fn walk_length(&self) -> f64 {
        self.state.traces.iter().map(|t| t.cells.len()).sum::<usize>() as f64
    }

    /// Percolation samples `lo..hi`.
    pub fn run_percolation(&mut self, seed: u64, lo: u64, hi: u64) {
        for k in lo..hi {
            self.percolation_walks(seed, k);
            self.record();
        }
    }

    /// Ising chain `chain` retaining `n` samples; returns the integrated
    /// autocorrelation time of the walk length.
    pub fn run_chain(&mut self, seed: u64, chain: u64, n: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ISING_STREAM | chain);
        let mut ising = IsingState::random(&self.spec, &mut rng)?;
        for _ in 0..BURN_IN_PER_SIZE * self.spec.linear_size() as u64 {
            sw_ising_sample(&self.spec, &mut ising, &mut rng);
        }
        let mut series = Vec::with_capacity(n as usize);
        for _ in 0..n {
            for _ in 1..SWEEPS_PER_SAMPLE {
                sw_ising_sample(&self.spec, &mut ising, &mut rng);
            }
            sw_ising_sample(&self.spec, &mut ising, &mut rng);
            self.fk_walks(&ising.bonds);
            self.record();
            series.push(self.walk_length());
        }
        Ok(integrated_autocorrelation(&series))
    }
}

/// Integrated autocorrelation time with a self-consistent window
/// `W >= 6 tau(W)`.
pub fn integrated_autocorrelation(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.5;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..n {
        let ct = (0..n - t).map(|i| (x[i] - mean) * (x[i + t] - mean)).sum::<f64>() / n as f64;
        tau += ct / c0;
        if t as f64 >= 6.0 * tau {
            break;
        }
    }
    tau
}

/// Tally `n_samples` samples. The result depends on `(spec, n_samples,
/// seed)` only: percolation sample `k` reads stream `k`, Ising samples come
/// from chains of `CHAIN_LEN` with their own streams.
pub fn run_experiment(spec: &LatticeSpec, n_samples: u64, seed: u64, workers: usize) -> Result<TallySet> {
    let proto = Sampler::new(spec)?;
    let empty = proto.tallies.clone();
    if n_samples == 0 {
        return Ok(empty);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let spec = *spec;
    pool.install(|| match spec.model {
        Model::BondPerc | Model::SitePerc => {
            let chunks = n_samples.div_ceil(CHUNK);
            let out = (0..chunks)
                .into_par_iter()
                .fold(
                    || proto.clone(),
                    |mut s, c| {
                        s.run_percolation(seed, c * CHUNK, ((c + 1) * CHUNK).min(n_samples));
                        s
                    },
                )
                .map(|s| s.tallies)
                .reduce(|| empty.clone(), TallySet::merge);
            Ok(out)
        }
        Model::IsingFk => {
            let chains = n_samples.div_ceil(CHAIN_LEN);
            (0..chains)
                .into_par_iter()
                .map(|c| {
                    let mut s = proto.clone();
                    let n = (n_samples - c * CHAIN_LEN).min(CHAIN_LEN);
                    let tau = s.run_chain(seed, c, n)?;
                    s.tallies.autocorrelation.insert(c, tau);
                    Ok(s.tallies)
                })
                .try_reduce(|| empty.clone(), |a, b| Ok(a.merge(b)))
        }
    })
}
