use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use crownseg_core::crowns::{delineate, scene_norms, SegmentationParams};
use crownseg_core::morphology::{top_hat_reconstruction, StructuringElement};
use crownseg_core::pipeline::{run_scene_pipeline, PipelineParams};
use crownseg_core::raster::{ndvi, vegetation_mask};
use crownseg_core::synth::{generate, DensityMode, Scene, SceneSpec};
use crownseg_core::terrain::csf_classify;

fn bench_scene(width: usize, n_trees: usize) -> Scene {
    generate(&SceneSpec {
        width,
        height: width,
        n_trees,
        density_mode: DensityMode::Sparse,
        rng_seed: 42,
        ..SceneSpec::default()
    })
    .expect("scene generates")
}

fn top_hat(c: &mut Criterion) {
    let scene = bench_scene(256, 16);
    let se = StructuringElement::disk(8);
    c.bench_function("top_hat_256", |b| {
        b.iter(|| top_hat_reconstruction(black_box(&scene.dsm), &se).unwrap())
    });
}

fn cloth_filter(c: &mut Criterion) {
    let scene = bench_scene(256, 16);
    let params = crownseg_core::terrain::CsfParams::default();
    c.bench_function("csf_256", |b| {
        b.iter(|| csf_classify(black_box(&scene.dsm), &params).unwrap())
    });
}

fn delineation(c: &mut Criterion) {
    let scene = bench_scene(256, 16);
    let veg = vegetation_mask(&ndvi(&scene.raster).unwrap(), 0.3);
    let params = SegmentationParams::default();
    let norms = scene_norms(&scene.truth_tops, &scene.raster, &veg);
    c.bench_function("delineate_256", |b| {
        b.iter(|| {
            delineate(
                black_box(&scene.truth_tops),
                &scene.dsm,
                &scene.raster,
                &veg,
                &params,
                &norms,
            )
            .unwrap()
        })
    });
}

fn full_pipeline(c: &mut Criterion) {
    let scene = bench_scene(256, 16);
    let params = PipelineParams::default();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("pipeline_256", |b| {
        b.iter(|| run_scene_pipeline(black_box(&scene.dsm), &scene.raster, &params, None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, top_hat, cloth_filter, delineation, full_pipeline);
criterion_main!(benches);
