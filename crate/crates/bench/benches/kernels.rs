use criterion::{black_box, criterion_group, criterion_main, Criterion};
use gaugelab::bundle::{comass_norm, make_monopole, perturb, ComassMode};
use gaugelab::coulomb::{lambda_on, DecOperators};
use gaugelab::experiments::{minimize_lattice_comass, LatticeMonopole};
use gaugelab::geometry::{from_polar, Manifold, PathCurve, SimplicialComplex};
use gaugelab::transport::{parallel_transport, TransportConfig};
use gaugelab::ucalc;
use rand::SeedableRng;

fn matrix_functions(c: &mut Criterion) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let a = ucalc::random_anti_hermitian(&mut rng, 3) * ucalc::C64::new(0.1, 0.0);
    let u = ucalc::expm(&a);
    c.bench_function("expm_3x3", |b| b.iter(|| ucalc::expm(black_box(&a))));
    c.bench_function("logm_3x3", |b| b.iter(|| ucalc::logm_unitary(black_box(&u)).unwrap()));
}

fn transport(c: &mut Criterion) {
    let bundle = perturb(&make_monopole(1), 4, 0.1).unwrap();
    let equator = PathCurve::parametric(
        Manifold::unit_sphere(),
        |s| from_polar(1.0, std::f64::consts::FRAC_PI_2, 2.0 * std::f64::consts::PI * s),
        0.0,
        1.0,
    );
    let cfg = TransportConfig::default();
    c.bench_function("equator_holonomy", |b| b.iter(|| parallel_transport(&bundle, black_box(&equator), &cfg).unwrap()));
    c.bench_function("comass_res2", |b| b.iter(|| comass_norm(black_box(&bundle), ComassMode::Full, 2).unwrap()));
}

fn discrete(c: &mut Criterion) {
    let ops = DecOperators::new(&SimplicialComplex::build(&Manifold::unit_sphere(), 3).unwrap()).unwrap();
    let mut g = c.benchmark_group("discrete");
    g.sample_size(10);
    g.bench_function("lambda_level3", |b| b.iter(|| lambda_on(black_box(&ops), 3).unwrap()));
    let mut lat = LatticeMonopole::from_monopole(1, 3).unwrap();
    lat.warp(7, 0.4).unwrap();
    g.bench_function("lattice_minimize_k1", |b| {
        b.iter(|| minimize_lattice_comass(&mut black_box(lat.clone()), 500, 1e-10).unwrap())
    });
    g.finish();
}

criterion_group!(benches, matrix_functions, transport, discrete);
criterion_main!(benches);
