use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use pmqkd::decoy::{decoy_entropy_bound, mixture_gains, DecoySettings, PhotonChannel};
use pmqkd::qcore::eig_hermitian;
use pmqkd::qcore::random::random_hermitian;
use pmqkd::simrun::{toeplitz_extract, toeplitz_hash, Bits};
use pmqkd::tradeoff::{ObjectiveKind, Problem, Solver};
use pmqkd_bench::{b92_lambda, b92_operators};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn eig(c: &mut Criterion) {
    let mut group = c.benchmark_group("eig_hermitian");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for dim in [4, 8, 16, 32] {
        let m = random_hermitian(dim, &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &m, |b, m| b.iter(|| eig_hermitian(black_box(m))));
    }
    group.finish();
}

fn objective(c: &mut Criterion) {
    let ops = b92_operators();
    let lambda = b92_lambda();
    let problem = Problem::new(&ops, ObjectiveKind::Full, &lambda).unwrap();
    let start = ops.mixed_completion();
    c.bench_function("objective_b92_full", |b| b.iter(|| problem.value_and_gradient(black_box(&start)).unwrap()));
}

fn frank_wolfe(c: &mut Criterion) {
    let ops = b92_operators();
    let lambda = b92_lambda();
    let solver = Solver::new(&ops);
    let mut group = c.benchmark_group("certified_c_b92");
    group.sample_size(10);
    group.bench_function("full", |b| {
        b.iter(|| solver.certified_c(ObjectiveKind::Full, black_box(&lambda), 1e-6, 2_000).unwrap())
    });
    group.finish();
}

fn hashing(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let input = Bits::random(100_000, &mut rng);
    let seed = Bits::random(100_000 + 34, &mut rng);
    c.bench_function("toeplitz_hash_1e5_to_35", |b| b.iter(|| toeplitz_hash(black_box(&input), &seed, 35).unwrap()));
    let ext_seed = Bits::random(100_000, &mut rng);
    c.bench_function("toeplitz_extract_1e5_to_5e4", |b| {
        b.iter(|| toeplitz_extract(black_box(&input), &ext_seed, 50_000).unwrap())
    });
}

fn decoy(c: &mut Criterion) {
    let settings = DecoySettings::new([0.4, 0.1, 0.007], [0.5, 0.25, 0.25], 0.5).unwrap();
    let gains = mixture_gains(&PhotonChannel::lossy(0.1, 1e-6, 0.01), &settings).unwrap();
    c.bench_function("decoy_entropy_bound", |b| b.iter(|| decoy_entropy_bound(black_box(&gains), &settings)));
}

criterion_group!(benches, eig, objective, frank_wolfe, hashing, decoy);
criterion_main!(benches);
