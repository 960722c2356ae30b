use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lattice::{BondLattice, SiteLattice, TRIANGULAR};
use super::oracle::*;
use super::walk::{bond_sample, bond_state, site_sample, site_state};
use super::*;

fn rect_lattice(w: usize, h: usize) -> (LatticeSpec, BondLattice) {
    let spec = LatticeSpec::rect_percolation(w, h).unwrap();
    let lat = BondLattice::new(&spec);
    (spec, lat)
}

fn site_at(lat: &BondLattice, x: i32, y: i32) -> usize {
    lat.frame.index(x, y)
}

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

#[test]
fn critical_probabilities() {
    let sq = LatticeKind::SquareRect { width: 4, height: 2 };
    let tri = LatticeKind::TriangularHex { side: 3 };
    assert_eq!(critical_probability(sq, Model::BondPerc).unwrap(), 0.5);
    assert_eq!(critical_probability(tri, Model::SitePerc).unwrap(), 0.5);
    assert_eq!(critical_probability(sq, Model::IsingFk).unwrap(), 2f64.sqrt() / (1.0 + 2f64.sqrt()));
    assert_eq!(critical_probability(tri, Model::IsingFk).unwrap(), (3f64.sqrt() - 1.0) / 3f64.sqrt());
    assert!(critical_probability(sq, Model::SitePerc).is_err());
    assert!(critical_probability(tri, Model::BondPerc).is_err());
}

#[test]
fn spec_validation() {
    assert!(LatticeSpec::rect_percolation(0, 3).is_err());
    assert!(LatticeSpec::hex_percolation(0).is_err());
    let mutual = crate::theory::FfbcEvent::new(2, 2).unwrap();
    let sq = LatticeKind::SquareRect { width: 4, height: 2 };
    assert!(LatticeSpec::with_wiring(sq, Model::BondPerc, mutual).is_err());
    assert!(LatticeSpec::with_wiring(sq, Model::IsingFk, mutual).is_ok());
    let hex_mutual = crate::theory::FfbcEvent::new(3, 2).unwrap();
    assert!(LatticeSpec::with_wiring(LatticeKind::TriangularHex { side: 2 }, Model::SitePerc, hex_mutual).is_err());
}

#[test]
fn grid_points_lie_inside_the_polygon() {
    let spec = LatticeSpec::rect_percolation(6, 3).unwrap();
    let pts = spec.grid_points();
    // W H horizontal bonds, (W - 1)(H - 1) free vertical bonds
    assert_eq!(pts.len(), 6 * 3 + 5 * 2);
    for &(_, x, y) in &pts {
        assert!(x > 0.0 && x < 2.0 && y > 0.0 && y < 1.0, "({x}, {y})");
    }
    let hex = LatticeSpec::hex_percolation(4).unwrap();
    let pts = hex.grid_points();
    assert_eq!(pts.len(), 3 * 4 * 5 + 1);
    let apothem = 3f64.sqrt() / 2.0;
    for &(_, x, y) in &pts {
        assert!(y.abs() < apothem, "({x}, {y})");
        assert!((3f64.sqrt() * x.abs() + y.abs()) < 3f64.sqrt(), "({x}, {y})");
    }
    let fk = LatticeSpec::hex_ising(3).unwrap();
    let lat = BondLattice::new(&fk);
    let tallied = lat.bond_cell.iter().filter(|&&c| c != lattice::NONE).count();
    assert_eq!(fk.grid_points().len(), tallied);
}

// ---------------------------------------------------------------------------
// Rectangle walks
// ---------------------------------------------------------------------------

#[test]
fn all_open_is_horizontal_all_closed_is_vertical() {
    for (w, h) in [(2, 1), (5, 3), (8, 8)] {
        let (spec, lat) = rect_lattice(w, h);
        let open = vec![true; lat.n_bond_slots()];
        let (traces, conn) = perc_hull_walk_rect(&spec, &mut Preset(&open)).unwrap();
        assert_eq!(conn, Connectivity(vec![(1, 2), (3, 4)]));
        assert!(conn.is_horizontal());
        // hugging the wired cluster: bottom and top rows
        let bottom: HashSet<u32> = (0..=w as i32).map(|i| site_at(&lat, i, 0) as u32).collect();
        assert_eq!(traces[0].inner.iter().copied().collect::<HashSet<_>>(), bottom);
        let closed = vec![false; lat.n_bond_slots()];
        let (traces, conn) = perc_hull_walk_rect(&spec, &mut Preset(&closed)).unwrap();
        assert_eq!(conn.to_string(), "(14)(23)");
        let left: HashSet<u32> = (0..h as i32).map(|j| site_at(&lat, 0, j) as u32).collect();
        assert_eq!(traces[0].inner.iter().copied().collect::<HashSet<_>>(), left);
    }
}

#[test]
fn rect_walks_match_union_find_on_every_configuration() {
    for (w, h) in [(2, 1), (1, 2), (2, 2), (3, 2), (2, 3), (3, 3), (4, 3)] {
        let (_, lat) = rect_lattice(w, h);
        let free = free_bonds(&lat);
        let mut state = bond_state(&lat);
        for mask in 0..1u64 << free.len() {
            let cfg = bond_config(&lat, &free, mask);
            let conn = bond_sample(&lat, &mut state, &mut Preset(&cfg)).unwrap();
            let crossing = rect_crossing(&lat, &cfg, w);
            assert_eq!(conn.is_horizontal(), crossing, "{w}x{h} mask {mask:b}");
            let second = if crossing { (3, 4) } else { (3, 2) };
            assert_eq!(conn.0[1], second);
        }
    }
}

#[test]
fn rect_walk_distribution_is_exact() {
    for (w, h) in [(2, 1), (1, 2), (3, 3)] {
        assert_eq!(rect_walked(w, h).unwrap(), rect_enumerated(w, h).unwrap(), "{w}x{h}");
    }
    // two bonds in series
    assert_eq!(rect_walked(2, 1).unwrap()["(12)(34)"], 0.25);
    assert!(rect_enumerated(5, 4).is_err());
}

/// Faces of the square rectangle: `F(a, b)` is the dual site at
/// `(a + 1/2, b)`, `0 <= a < W`, `0 <= b <= H`.
fn rect_dual_cluster(lat: &BondLattice, cfg: &[bool], w: usize, h: usize, seed_top: bool) -> HashSet<(i32, i32)> {
    let (wi, hi) = (w as i32, h as i32);
    let closed = |s: usize, d: usize| {
        let u = lat.neighbor(s, d).unwrap();
        !(lat.forced(s, u) || cfg[lat.bond(s, d)])
    };
    let mut seen = HashSet::new();
    let b0 = if seed_top { hi } else { 0 };
    let mut stack: Vec<(i32, i32)> = (0..wi).map(|a| (a, b0)).collect();
    while let Some((a, b)) = stack.pop() {
        if !seen.insert((a, b)) {
            continue;
        }
        let mut next = Vec::new();
        if b == 0 || b == hi {
            next.extend((0..wi).map(|x| (x, b)));
        }
        // up: primal horizontal bond (a, b) - (a + 1, b)
        if b < hi && closed(site_at(lat, a, b), 0) {
            next.push((a, b + 1));
        }
        if b > 0 && closed(site_at(lat, a, b - 1), 0) {
            next.push((a, b - 1));
        }
        // right: primal vertical bond (a + 1, b - 1) - (a + 1, b)
        if a + 1 < wi && b > 0 && b < hi && closed(site_at(lat, a + 1, b - 1), 1) {
            next.push((a + 1, b));
        }
        if a > 0 && b > 0 && b < hi && closed(site_at(lat, a, b - 1), 1) {
            next.push((a - 1, b));
        }
        stack.extend(next.into_iter().filter(|f| !seen.contains(f)));
    }
    seen
}

fn rect_perimeter_oracle(lat: &BondLattice, cfg: &[bool], w: usize, h: usize, from_top: bool) -> HashSet<u32> {
    let dual = rect_dual_cluster(lat, cfg, w, h, from_top);
    let mut uf = primal_clusters(lat, cfg);
    let anchor = if from_top { site_at(lat, w as i32, h as i32 - 1) } else { site_at(lat, 0, 0) };
    let root = uf.find(anchor);
    let mut out = HashSet::new();
    for j in 0..h as i32 {
        for i in 0..=w as i32 {
            let s = site_at(lat, i, j);
            if uf.find(s) != root {
                continue;
            }
            let faces = [(i, j), (i, j + 1), (i - 1, j + 1), (i - 1, j)];
            if faces.iter().any(|f| dual.contains(f)) {
                out.insert(s as u32);
            }
        }
    }
    out
}

#[test]
fn rect_perimeter_matches_flood_fill() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (w, h) in [(3, 2), (6, 4), (12, 6), (9, 9)] {
        let spec = LatticeSpec::rect_ising(w, h).unwrap();
        let lat = BondLattice::new(&spec);
        for _ in 0..40 {
            let mut ising = IsingState::random(&spec, &mut rng).unwrap();
            let p = 0.3 + 0.4 * (rng.next_u32() as f64 / u32::MAX as f64);
            let sp = LatticeSpec { p_c: p, ..spec };
            let cfg = sw_ising_sample(&sp, &mut ising, &mut rng).to_vec();
            for (start, top) in [(1u8, false), (3u8, true)] {
                let trace = fk_perimeter_walk(&spec, &cfg, start).unwrap();
                let got: HashSet<u32> = trace.inner.iter().copied().collect();
                assert_eq!(got, rect_perimeter_oracle(&lat, &cfg, w, h, top), "{w}x{h} from {start}");
            }
        }
    }
}

use rand_chacha::rand_core::RngCore;

#[test]
fn fk_walk_on_isolated_and_full_sides() {
    let spec = LatticeSpec::rect_ising(7, 4).unwrap();
    let lat = BondLattice::new(&spec);
    let none = vec![false; lat.n_bond_slots()];
    let t = fk_perimeter_walk(&spec, &none, 1).unwrap();
    let left: HashSet<u32> = (0..4).map(|j| site_at(&lat, 0, j) as u32).collect();
    assert_eq!(t.inner.iter().copied().collect::<HashSet<_>>(), left);
    assert_eq!(t.end, 4);
    let all = vec![true; lat.n_bond_slots()];
    let t = fk_perimeter_walk(&spec, &all, 1).unwrap();
    let bottom: HashSet<u32> = (0..=7).map(|i| site_at(&lat, i, 0) as u32).collect();
    assert_eq!(t.inner.iter().copied().collect::<HashSet<_>>(), bottom);
    assert_eq!(t.end, 2);
    let t = fk_perimeter_walk(&spec, &all, 3).unwrap();
    let top: HashSet<u32> = (0..=7).map(|i| site_at(&lat, i, 3) as u32).collect();
    assert_eq!(t.inner.iter().copied().collect::<HashSet<_>>(), top);
    assert_eq!(t.end, 4);
    assert!(fk_perimeter_walk(&spec, &all[1..], 1).is_err());
    assert!(fk_perimeter_walk(&spec, &all, 2).is_err());
}

// ---------------------------------------------------------------------------
// Hexagon site walks
// ---------------------------------------------------------------------------

#[test]
fn hex_forced_states() {
    for side in [1, 2, 5] {
        let spec = LatticeSpec::hex_percolation(side).unwrap();
        let lat = SiteLattice::new(side);
        let all = vec![true; lat.n_sites()];
        let (traces, conn) = perc_hull_walk_hex(&spec, &mut Preset(&all)).unwrap();
        assert_eq!(conn, Connectivity(vec![(1, 6), (3, 2), (5, 4)]));
        // inner arc: active sites along the free side [6,1]
        let l = side as i32;
        let mut side61: HashSet<u32> = (0..=l).map(|k| lat.frame.index(-k, k - l) as u32).collect();
        side61.insert(lat.frame.index(0, -l - 1) as u32);
        side61.insert(lat.frame.index(-l - 1, 0) as u32);
        assert_eq!(traces[0].inner.iter().copied().collect::<HashSet<_>>(), side61);
        let none = vec![false; lat.n_sites()];
        let (traces, conn) = perc_hull_walk_hex(&spec, &mut Preset(&none)).unwrap();
        assert_eq!(conn, Connectivity(vec![(1, 2), (3, 4), (5, 6)]));
        // inner arc: the wired ring of side [1,2]
        let ring12: HashSet<u32> = (0..=l + 1).map(|i| lat.frame.index(i, -l - 1) as u32).collect();
        assert_eq!(traces[0].inner.iter().copied().collect::<HashSet<_>>(), ring12);
    }
}

#[test]
fn hex_walks_match_union_find_on_every_configuration() {
    for side in [1, 2] {
        let lat = SiteLattice::new(side);
        let free = lat.free_sites();
        let mut state = site_state(&lat);
        for mask in 0..1u64 << free.len() {
            let cfg = hex_config(&lat, &free, mask);
            let conn = site_sample(&lat, &mut state, &mut Preset(&cfg)).unwrap();
            assert_eq!(conn.to_string(), hex_matching(&lat, &cfg), "side {side} mask {mask:b}");
            assert!(conn.0.iter().all(|&(_, e)| e % 2 == 0));
        }
    }
}

#[test]
fn hex_walk_distribution_is_exact() {
    for side in [1, 2] {
        let walked = hex_walked(side).unwrap();
        assert_eq!(walked, hex_enumerated(side).unwrap(), "side {side}");
        assert_eq!(walked.len(), 5);
    }
}

#[test]
fn hex_arcs_match_flood_fill() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for side in [2, 4, 9] {
        let lat = SiteLattice::new(side);
        let mut state = site_state(&lat);
        for _ in 0..40 {
            let cfg: Vec<bool> = (0..lat.n_sites()).map(|_| rng.next_u32() & 1 == 1).collect();
            site_sample(&lat, &mut state, &mut Preset(&cfg)).unwrap();
            let mut act = site_clusters(&lat, &cfg, true);
            let mut vac = site_clusters(&lat, &cfg, false);
            for (w, st) in lat.starts.iter().enumerate() {
                let ca = act.find(st.site);
                let cv = vac.find(lat.step(st.site, st.dir));
                let (mut inner, mut outer) = (HashSet::new(), HashSet::new());
                for s in 0..lat.n_sites() {
                    if lat.state[s] == lattice::OUTSIDE {
                        continue;
                    }
                    for d in 0..6 {
                        let u = lat.step(s, d);
                        if lat.state[u] == lattice::OUTSIDE {
                            continue;
                        }
                        let (sa, ua) = (site_active(&lat, &cfg, s), site_active(&lat, &cfg, u));
                        if sa && !ua && act.find(s) == ca && vac.find(u) == cv {
                            inner.insert(s as u32);
                            outer.insert(u as u32);
                        }
                    }
                }
                let t = &state.traces[w];
                assert_eq!(t.inner.iter().copied().collect::<HashSet<_>>(), inner, "side {side} walk {w}");
                assert_eq!(t.outer.iter().copied().collect::<HashSet<_>>(), outer, "side {side} walk {w}");
            }
        }
    }
}

#[test]
fn hex_fk_walks_end_at_distinct_even_vertices() {
    let spec = LatticeSpec::hex_ising(6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ising = IsingState::random(&spec, &mut rng).unwrap();
    let mut sampler = Sampler::new(&spec).unwrap();
    let lat = BondLattice::new(&spec);
    let mut seen = HashSet::new();
    for _ in 0..300 {
        let cfg = sw_ising_sample(&spec, &mut ising, &mut rng).to_vec();
        let conn = sampler.fk_walks(&cfg);
        let ends: HashSet<u8> = conn.0.iter().map(|&(_, e)| e).collect();
        assert_eq!(ends.len(), 3);
        assert!(ends.iter().all(|e| e % 2 == 0));
        let mut uf = primal_clusters(&lat, &cfg);
        for t in sampler.traces() {
            let anchor = lat.starts.iter().find(|s| s.vertex == t.start).unwrap().site;
            let root = uf.find(anchor);
            assert!(t.inner.iter().all(|&s| uf.find(s as usize) == root));
        }
        seen.insert(conn.to_string());
    }
    assert!(seen.len() >= 3, "{seen:?}");
}

// ---------------------------------------------------------------------------
// Walk well-formedness
// ---------------------------------------------------------------------------

struct Counting<S> {
    inner: S,
    seen: HashSet<usize>,
}

impl<S: CellSource> CellSource for Counting<S> {
    fn decide(&mut self, cell: usize) -> Option<bool> {
        assert!(self.seen.insert(cell), "cell {cell} decided twice");
        self.inner.decide(cell)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rect_walks_are_self_avoiding(seed in any::<u64>(), w in 1usize..30, h in 1usize..20) {
        let (_, lat) = rect_lattice(w, h);
        let mut state = bond_state(&lat);
        state.log = Some(Vec::new());
        let mut src = Counting { inner: Stream::new(seed, 0, 0.5), seen: HashSet::new() };
        let conn = bond_sample(&lat, &mut state, &mut src).unwrap();
        let log = state.log.as_ref().unwrap();
        let flags: HashSet<_> = log.iter().collect();
        prop_assert_eq!(flags.len(), log.len());
        prop_assert_eq!(src.seen.len() as u64, state.decisions);
        prop_assert!(conn.0[0].1 % 2 == 0 && conn.0[1].1 % 2 == 0 && conn.0[0].1 != conn.0[1].1);
    }

    #[test]
    fn hex_walks_are_self_avoiding(seed in any::<u64>(), side in 1usize..25) {
        let lat = SiteLattice::new(side);
        let mut state = site_state(&lat);
        state.log = Some(Vec::new());
        let mut src = Counting { inner: Stream::new(seed, 0, 0.5), seen: HashSet::new() };
        site_sample(&lat, &mut state, &mut src).unwrap();
        let log = state.log.as_ref().unwrap();
        let flags: HashSet<_> = log.iter().collect();
        prop_assert_eq!(flags.len(), log.len());
    }
}

// ---------------------------------------------------------------------------
// Swendsen-Wang
// ---------------------------------------------------------------------------

#[test]
fn sw_at_full_activation_builds_maximal_clusters() {
    let spec = LatticeSpec { p_c: 1.0, ..LatticeSpec::rect_ising(9, 6).unwrap() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut st = IsingState::random(&spec, &mut rng).unwrap();
    let edges = st.bond_list();
    for _ in 0..5 {
        let before = st.spins.clone();
        let bonds = sw_ising_sample(&spec, &mut st, &mut rng).to_vec();
        for &(b, s, u) in &edges {
            assert_eq!(bonds[b], before[s] == before[u]);
            if bonds[b] {
                assert_eq!(st.spins[s], st.spins[u]);
            }
        }
    }
}

#[test]
fn sw_without_bonds_is_uniform() {
    // 4 x 4 sites: two wired columns of four, eight free sites
    let spec = LatticeSpec { p_c: 0.0, ..LatticeSpec::rect_ising(3, 4).unwrap() };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut st = IsingState::random(&spec, &mut rng).unwrap();
    assert_eq!(st.sites().len(), 16);
    let sweeps = 10_000;
    let mut sum = 0i64;
    let lat = BondLattice::new(&spec);
    let edges = st.bond_list();
    for _ in 0..sweeps {
        let bonds = sw_ising_sample(&spec, &mut st, &mut rng);
        assert!(edges.iter().all(|&(b, s, u)| bonds[b] == lat.forced(s, u)));
        sum += st.magnetization();
    }
    let mean = sum as f64 / sweeps as f64;
    let sigma = (40.0 / sweeps as f64).sqrt();
    assert!(mean.abs() < 3.0 * sigma, "mean magnetization {mean}, sigma {sigma}");
}

#[test]
fn sw_matches_boltzmann_weights() {
    // 3 x 3 sites: wired left and right columns, free middle column
    let spec = LatticeSpec::rect_ising(2, 3).unwrap();
    let fit = sw_boltzmann_fit(&spec, 1_000_000, 10, 17).unwrap();
    assert_eq!(fit.dof, 31);
    assert!(fit.passes(), "independent wiring: {fit:?}");
    let mutual = crate::theory::FfbcEvent::new(2, 2).unwrap();
    let spec = LatticeSpec::with_wiring(spec.kind, Model::IsingFk, mutual).unwrap();
    let fit = sw_boltzmann_fit(&spec, 1_000_000, 10, 18).unwrap();
    assert_eq!(fit.dof, 15);
    assert!(fit.passes(), "mutual wiring: {fit:?}");
}

// ---------------------------------------------------------------------------
// Tallies
// ---------------------------------------------------------------------------

fn trace(start: u8, end: u8, cells: &[u32]) -> WalkTrace {
    WalkTrace { start, end, cells: cells.to_vec(), ..Default::default() }
}

#[test]
fn tally_disjoint_and_identical_traces() {
    let labels = tally::labels(2);
    let mut t = TallySet::new(10, 1, &labels);
    tally(&[trace(1, 2, &[0, 1, 2]), trace(3, 4, &[5, 6])], &mut t);
    assert_eq!(t.total("1234"), 0);
    assert_eq!(t.grid("arc12").unwrap()[..3], [1, 1, 1]);
    assert_eq!(t.grid("arc34").unwrap()[5..7], [1, 1]);
    let mut t = TallySet::new(10, 1, &labels);
    tally(&[trace(1, 4, &[2, 3, 4]), trace(3, 2, &[2, 3, 4])], &mut t);
    let two = t.grid("1234").unwrap();
    let one = t.grid("arc14").unwrap();
    assert_eq!(two, one);
    assert_eq!(t.grid("arc23").unwrap(), one);
    assert_eq!(t.connectivity["(14)(23)"], 1);
}

#[test]
fn tally_three_site_overlap() {
    let labels = tally::labels(3);
    let mut t = TallySet::new(12, 1, &labels);
    // arcs (12)(36)(45): walks 1 and 3 meet at 4, 5; all three meet at 6
    let traces = [trace(1, 2, &[0, 4, 5, 6]), trace(3, 6, &[4, 5, 6, 7]), trace(5, 4, &[6, 8])];
    tally(&traces, &mut t);
    let g = |l: &str| t.grid(l).unwrap().to_vec();
    let mut expect = vec![0u64; 12];
    expect[4] = 1;
    expect[5] = 1;
    expect[6] = 1;
    assert_eq!(g("6123:45"), expect);
    let mut six = vec![0u64; 12];
    six[6] = 1;
    assert_eq!(g("123456"), six);
    // walks 3 and 5 with third arc (12): label 3456:12
    assert_eq!(g("3456:12"), six);
    // walks 1 and 5 sit across arc (36): no label
    assert_eq!(t.grids.values().map(|v| v.iter().sum::<u64>()).sum::<u64>(), 4 + 4 + 2 + 3 + 1 + 1);
    assert_eq!(g("arc12")[..7], [1, 0, 0, 0, 1, 1, 1]);
    assert_eq!(t.connectivity["(12)(36)(45)"], 1);
}

#[test]
fn merge_is_exact_and_commutative() {
    let labels = tally::labels(2);
    let mut a = TallySet::new(8, 1, &labels);
    let mut b = TallySet::new(8, 1, &labels);
    tally(&[trace(1, 2, &[0, 1]), trace(3, 4, &[1, 2])], &mut a);
    tally(&[trace(1, 4, &[3]), trace(3, 2, &[3, 4])], &mut b);
    let ab = a.clone().merge(b.clone());
    let ba = b.merge(a);
    assert_eq!(ab, ba);
    assert_eq!(ab.sample_count, 2);
    assert_eq!(ab.total("1234"), 2);
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

#[test]
fn zero_samples_give_empty_tallies() {
    let spec = LatticeSpec::rect_percolation(10, 5).unwrap();
    let t = run_experiment(&spec, 0, 1, 2).unwrap();
    assert_eq!(t.sample_count, 0);
    assert!(t.grids.values().all(|g| g.iter().all(|&c| c == 0)));
    assert_eq!(t.grids.len(), 5);
}

#[test]
fn tallies_do_not_depend_on_worker_count() {
    let specs = [
        (LatticeSpec::rect_percolation(16, 8).unwrap(), 3 * CHUNK + 17),
        (LatticeSpec::hex_percolation(6).unwrap(), 2 * CHUNK + 5),
        (LatticeSpec::rect_ising(4, 2).unwrap(), CHAIN_LEN + 3),
    ];
    for (spec, n) in specs {
        let one = run_experiment(&spec, n, 99, 1).unwrap();
        for workers in [4, 8] {
            assert_eq!(run_experiment(&spec, n, 99, workers).unwrap(), one, "{:?} workers {workers}", spec.model);
        }
        assert_eq!(one.sample_count, n);
        assert_eq!(one.connectivity.values().sum::<u64>(), n);
    }
}

#[test]
fn grid_totals_grow_with_samples() {
    let spec = LatticeSpec::hex_percolation(5).unwrap();
    let short = run_experiment(&spec, 300, 4, 1).unwrap();
    let long = run_experiment(&spec, 700, 4, 1).unwrap();
    for (k, g) in &short.grids {
        assert!(g.iter().zip(&long.grids[k]).all(|(a, b)| a <= b), "{k}");
    }
}

#[test]
fn square_crossing_is_even() {
    let spec = LatticeSpec::rect_percolation(24, 24).unwrap();
    let n = 4000;
    let t = run_experiment(&spec, n, 8, 1).unwrap();
    let h = *t.connectivity.get("(12)(34)").unwrap_or(&0) as f64 / n as f64;
    let sigma = (0.25 / n as f64).sqrt();
    assert!((h - 0.5).abs() < 3.0 * sigma, "horizontal frequency {h}");
}

/// `sum (a - b)^2 / (a + b)` per degree of freedom over mirrored cells.
fn mirror_chi2(spec: &LatticeSpec, a: &[u64], b: &[u64], mirror: impl Fn(f64, f64) -> (f64, f64)) -> (f64, usize) {
    let key = |x: f64, y: f64| ((x * 1e6).round() as i64, (y * 1e6).round() as i64);
    let pts = spec.grid_points();
    let index: HashMap<_, usize> = pts.iter().map(|&(i, x, y)| (key(x, y), i)).collect();
    let (mut chi2, mut dof) = (0.0, 0);
    for &(i, x, y) in &pts {
        let (mx, my) = mirror(x, y);
        let j = *index.get(&key(mx, my)).unwrap_or_else(|| panic!("no mirror of ({x}, {y})"));
        let s = (a[i] + b[j]) as f64;
        if s > 20.0 {
            chi2 += (a[i] as f64 - b[j] as f64).powi(2) / s;
            dof += 1;
        }
    }
    (chi2 / dof as f64, dof)
}

#[test]
fn rect_tallies_are_reflection_symmetric() {
    let spec = LatticeSpec::rect_percolation(20, 10).unwrap();
    let t = run_experiment(&spec, 20_000, 21, 1).unwrap();
    let g = |l: &str| t.grid(l).unwrap();
    let checks = [
        ("arc12", "arc12", true),
        ("arc34", "arc34", true),
        ("arc12", "arc34", false),
        ("arc14", "arc23", true),
        ("1234", "1234", true),
        ("1234", "1234", false),
    ];
    for (a, b, in_x) in checks {
        let (r, dof) = mirror_chi2(&spec, g(a), g(b), |x, y| if in_x { (2.0 - x, y) } else { (x, 1.0 - y) });
        assert!(dof > 50, "{a}/{b}: {dof} cells");
        assert!(r < 1.0 + 5.0 * (2.0 / dof as f64).sqrt(), "{a}/{b} mirrored chi2 per cell {r}");
    }
}

#[test]
fn hex_tallies_have_the_wiring_symmetry() {
    let spec = LatticeSpec::hex_percolation(8).unwrap();
    let t = run_experiment(&spec, 20_000, 22, 1).unwrap();
    let g = |l: &str| t.grid(l).unwrap();
    let rot = |x: f64, y: f64| {
        let (c, s) = ((2.0 * std::f64::consts::PI / 3.0).cos(), (2.0 * std::f64::consts::PI / 3.0).sin());
        (c * x - s * y, s * x + c * y)
    };
    for (a, b) in [("arc12", "arc34"), ("arc34", "arc56"), ("6123:45", "2345:61")] {
        let (r, dof) = mirror_chi2(&spec, g(a), g(b), rot);
        assert!(r < 1.0 + 5.0 * (2.0 / dof as f64).sqrt(), "{a}/{b} rotated chi2 per cell {r}");
    }
    // x -> -x swaps 1 and 2, 3 and 6, 4 and 5
    for (a, b) in [("arc12", "arc12"), ("arc36", "arc36"), ("6123:45", "6123:45"), ("4561:23", "2345:61")] {
        let (r, dof) = mirror_chi2(&spec, g(a), g(b), |x, y| (-x, y));
        assert!(r < 1.0 + 5.0 * (2.0 / dof as f64).sqrt(), "{a}/{b} reflected chi2 per cell {r}");
    }
    // the triangular rotation maps lattice sites onto lattice sites
    let _ = TRIANGULAR;
}
