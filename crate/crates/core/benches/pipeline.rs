use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use facade_core::parallel::map_ordered;
use facade_core::pipeline::{extract_image, Settings};
use facade_core::synth::{corpus_specs, perturbed_detections, synthesize};
use facade_core::{
    associate_windows, AssociationConfig, BoundingBox, CorpusSpec, DetectionSet, RasterImage,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus() -> Vec<(RasterImage, DetectionSet)> {
    let spec = CorpusSpec::reference_split(5, 3);
    corpus_specs(&spec)
        .unwrap()
        .iter()
        .map(|s| {
            let img = synthesize(s).unwrap();
            let dets = perturbed_detections(img.entry(), s.canvas.0, s.canvas.1, 3, s.seed);
            (img.image, dets)
        })
        .collect()
}

fn workers() -> Vec<usize> {
    let n = std::thread::available_parallelism().map_or(4, |n| n.get());
    let mut w = vec![1, 2, n];
    w.dedup();
    w
}

fn bench_extract(c: &mut Criterion) {
    let items = corpus();
    let settings = Settings::default();
    let mut group = c.benchmark_group("extract_112_images");
    for w in workers() {
        group.bench_with_input(BenchmarkId::from_parameter(w), &w, |b, &w| {
            b.iter(|| {
                map_ordered(&items, w, |(img, dets)| {
                    extract_image(black_box(img), black_box(dets), &settings)
                        .records
                        .len()
                })
            })
        });
    }
    group.finish();
}

fn random_box(rng: &mut ChaCha8Rng, grid: u32) -> BoundingBox {
    let x = rng.random_range(0..grid - 1);
    let y = rng.random_range(0..grid - 1);
    let w = rng.random_range(1..=grid - x);
    let h = rng.random_range(1..=grid - y);
    BoundingBox::new(x, y, w, h).unwrap()
}

fn bench_association(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let instances: Vec<(Vec<BoundingBox>, Vec<BoundingBox>)> = (0..2000)
        .map(|_| {
            let b = (0..6).map(|_| random_box(&mut rng, 512)).collect();
            let w = (0..60).map(|_| random_box(&mut rng, 512)).collect();
            (b, w)
        })
        .collect();
    let cfg = AssociationConfig::default();
    let mut group = c.benchmark_group("associate_2000_instances");
    for w in workers() {
        group.bench_with_input(BenchmarkId::from_parameter(w), &w, |b, &w| {
            b.iter(|| {
                map_ordered(&instances, w, |(bs, ws)| {
                    associate_windows(bs, ws, &cfg).noise.len()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_extract, bench_association);
criterion_main!(benches);
