//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers. Run with
//! `cargo test -p crownseg-core --test acceptance`.

use std::time::Instant;

use crownseg_core::crowns::{
    assign_labels, delineate, kernel_distance, scene_norms, SegmentationParams,
};
use crownseg_core::eval::{compute_metrics, MatchedPair};
use crownseg_core::morphology::{
    dilate, erode, opening, reconstruct_by_dilation, top_hat_reconstruction, StructuringElement,
};
use crownseg_core::pipeline::{run_benchmark, run_scene_pipeline, write_artifacts, PipelineParams};
use crownseg_core::raster::{Grid, Mask, MultibandRaster};
use crownseg_core::synth::{generate, DensityMode, SceneSpec};
use crownseg_core::terrain::{csf_classify, CsfParams, HeightMode};
use crownseg_core::treetops::{allometric_diameter, detect_thr, DetectorKind, TreetopCandidate};

// ---------------------------------------------------------------------
// shared scene definitions
// ---------------------------------------------------------------------

fn sparse_scene() -> SceneSpec {
    SceneSpec {
        width: 512,
        height: 512,
        n_trees: 50,
        density_mode: DensityMode::Sparse,
        rng_seed: 42,
        ..SceneSpec::default()
    }
}

fn dense_scene() -> SceneSpec {
    SceneSpec {
        width: 512,
        height: 512,
        n_trees: 200,
        density_mode: DensityMode::Dense,
        rng_seed: 7,
        // closed canopy degrades image matching, so the dense scene carries
        // heavier surface noise than the sparse one
        noise_sigma: 0.5,
        ..SceneSpec::default()
    }
}

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 11
    }

    fn uniform(&mut self) -> f64 {
        self.next() as f64 / (1u64 << 53) as f64
    }
}

// ---------------------------------------------------------------------
// 1. metric identities and the published sparse-site row
// ---------------------------------------------------------------------

#[test]
fn criterion_01_metric_identities() {
    let start = Instant::now();
    let mut rng = Lcg(0x1234);
    let mut checked = 0;
    while checked < 1000 {
        let n_tp = (rng.next() % 500) as usize;
        let n_fp = (rng.next() % 400) as usize;
        let n_fn = (rng.next() % 400) as usize;
        if n_tp + n_fn == 0 || n_tp + n_fp == 0 {
            continue;
        }
        checked += 1;
        let pairs: Vec<MatchedPair> = (0..n_tp)
            .map(|i| MatchedPair {
                ref_id: i,
                pred_id: i,
                overlap_ratio: 0.3 + 0.7 * rng.uniform(),
            })
            .collect();
        let rep = compute_metrics(pairs, n_tp + n_fn, n_tp + n_fp).unwrap();
        assert_eq!(rep.p + rep.e_com, 1.0, "P + e_com must equal 1 exactly");
        assert_eq!(rep.da + rep.e_om, 1.0, "r + e_om must equal 1 exactly");
    }

    // published sparse-site detector row from its reconstructed counts
    let pairs: Vec<MatchedPair> = (0..273)
        .map(|i| MatchedPair {
            ref_id: i,
            pred_id: i,
            overlap_ratio: 0.64,
        })
        .collect();
    let rep = compute_metrics(pairs, 307, 355).unwrap();
    assert!((rep.da - 0.89).abs() < 0.005, "DA {:.4}", rep.da);
    assert!((rep.e_com - 0.23).abs() < 0.005, "e_com {:.4}", rep.e_com);
    assert!((rep.p - 0.76).abs() <= 0.01 + 1e-12, "P {:.4}", rep.p);
    assert!(
        (rep.f_score - 0.82).abs() <= 0.01 + 1e-12,
        "F {:.4}",
        rep.f_score
    );

    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 1.0, "took {:.2}s, budget 1s", secs);
    println!(
        "criterion 01 metric identities: PASS (1000 triples exact; row DA {:.3} e_com {:.3} P {:.3} F {:.3}; {:.2}s)",
        rep.da, rep.e_com, rep.p, rep.f_score, secs
    );
}

// ---------------------------------------------------------------------
// 2. morphology equals nested-loop brute force
// ---------------------------------------------------------------------

fn oracle_filter(grid: &Grid, se: &StructuringElement, take_min: bool) -> Grid {
    let mut out = grid.like(grid.nodata());
    for row in 0..grid.height() as isize {
        for col in 0..grid.width() as isize {
            let mut best: Option<f64> = None;
            for &(dr, dc) in se.offsets() {
                if let Some(v) = grid.value(row + dr as isize, col + dc as isize) {
                    best = Some(match best {
                        None => v,
                        Some(b) if take_min => b.min(v),
                        Some(b) => b.max(v),
                    });
                }
            }
            if let Some(b) = best {
                out.set(row as usize, col as usize, b);
            }
        }
    }
    out
}

fn oracle_reconstruct(marker: &Grid, mask: &Grid) -> Grid {
    let w = mask.width();
    let h = mask.height();
    let mut rec: Vec<f64> = (0..w * h)
        .map(|i| marker.values()[i].min(mask.values()[i]))
        .collect();
    loop {
        let prev = rec.clone();
        let mut changed = false;
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                let mut v = prev[i];
                if r > 0 {
                    v = v.max(prev[i - w]);
                }
                if r + 1 < h {
                    v = v.max(prev[i + w]);
                }
                if c > 0 {
                    v = v.max(prev[i - 1]);
                }
                if c + 1 < w {
                    v = v.max(prev[i + 1]);
                }
                let v = v.min(mask.values()[i]);
                if v != rec[i] {
                    rec[i] = v;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut out = mask.like(0.0);
    out.values_mut().copy_from_slice(&rec);
    out
}

#[test]
fn criterion_02_morphology_matches_brute_force() {
    let start = Instant::now();
    let mut rng = Lcg(0xBEEF);
    for trial in 0..100 {
        let mut g = Grid::filled(32, 32, 1.0, 0.0);
        for i in 0..g.len() {
            g.values_mut()[i] = rng.uniform() * 25.0;
        }
        let se = StructuringElement::disk(1 + (trial % 4));

        let er = erode(&g, &se);
        assert_eq!(
            er.values(),
            oracle_filter(&g, &se, true).values(),
            "erode, trial {}",
            trial
        );
        let di = dilate(&g, &se);
        assert_eq!(
            di.values(),
            oracle_filter(&g, &se, false).values(),
            "dilate, trial {}",
            trial
        );
        let op = opening(&g, &se);
        let op_oracle = oracle_filter(&oracle_filter(&g, &se, true), &se, false);
        assert_eq!(op.values(), op_oracle.values(), "opening, trial {}", trial);
        let rec_oracle = oracle_reconstruct(&er, &g);
        let rec = reconstruct_by_dilation(&er, &g).unwrap();
        assert_eq!(
            rec.values(),
            rec_oracle.values(),
            "reconstruction, trial {}",
            trial
        );
        let thr = top_hat_reconstruction(&g, &se).unwrap();
        for i in 0..g.len() {
            let expected = g.values()[i] - rec_oracle.values()[i];
            assert_eq!(thr.values()[i], expected, "top-hat, trial {}", trial);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 10.0, "took {:.2}s, budget 10s", secs);
    println!(
        "criterion 02 morphology brute-force equivalence: PASS (100 random 32x32 grids, {:.2}s)",
        secs
    );
}

// ---------------------------------------------------------------------
// 3. top-hat detection is insensitive to the SE size
// ---------------------------------------------------------------------

#[test]
fn criterion_03_se_insensitivity() {
    let scene = generate(&sparse_scene()).unwrap();
    let veg = crownseg_core::raster::vegetation_mask(
        &crownseg_core::raster::ndvi(&scene.raster).unwrap(),
        0.3,
    );
    // The opening must stay below the top-hat response scale of the
    // smaller SE (a radius-4 SE yields response blobs only ~4 px wide),
    // so this comparison fixes it at radius 2 for both runs.
    let opening_se = StructuringElement::disk(2);
    let a = detect_thr(&scene.dsm, &veg, &StructuringElement::disk(4), &opening_se).unwrap();
    let b = detect_thr(&scene.dsm, &veg, &StructuringElement::disk(8), &opening_se).unwrap();

    // greedy 1-px matching between the two candidate sets
    let mut used = vec![false; b.len()];
    let mut matched = 0;
    for ca in &a {
        for (j, cb) in b.iter().enumerate() {
            if !used[j] && ca.row.abs_diff(cb.row) <= 1 && ca.col.abs_diff(cb.col) <= 1 {
                used[j] = true;
                matched += 1;
                break;
            }
        }
    }
    let agreement = matched as f64 / a.len().max(b.len()) as f64;
    assert!(
        agreement >= 0.95,
        "SE 4 vs 8 agreement {:.3} ({} vs {} candidates, {} matched)",
        agreement,
        a.len(),
        b.len(),
        matched
    );
    println!(
        "criterion 03 SE insensitivity: PASS (agreement {:.3}, {} vs {} candidates)",
        agreement,
        a.len(),
        b.len()
    );
}

// ---------------------------------------------------------------------
// 4. sparse-scene accuracy
// ---------------------------------------------------------------------

#[test]
fn criterion_04_sparse_scene_accuracy() {
    let start = Instant::now();
    let scene = generate(&sparse_scene()).unwrap();
    let out = run_scene_pipeline(
        &scene.dsm,
        &scene.raster,
        &PipelineParams::default(),
        Some(&scene.truth_crowns),
    )
    .unwrap();
    let rep = out.report.unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert!(rep.da >= 0.90, "DA {:.3} < 0.90", rep.da);
    assert!(rep.e_com <= 0.10, "e_com {:.3} > 0.10", rep.e_com);
    assert!(rep.ca >= 0.60, "CA {:.3} < 0.60", rep.ca);
    assert!(secs < 30.0, "took {:.1}s, budget 30s", secs);
    println!(
        "criterion 04 sparse accuracy: PASS (DA {:.3}, e_com {:.3}, CA {:.3}, {:.1}s)",
        rep.da, rep.e_com, rep.ca, secs
    );
}

// ---------------------------------------------------------------------
// 5. dense-scene accuracy
// ---------------------------------------------------------------------

#[test]
fn criterion_05_dense_scene_accuracy() {
    let scene = generate(&dense_scene()).unwrap();
    let out = run_scene_pipeline(
        &scene.dsm,
        &scene.raster,
        &PipelineParams::default(),
        Some(&scene.truth_crowns),
    )
    .unwrap();
    let rep = out.report.unwrap();
    assert!(rep.da >= 0.80, "DA {:.3} < 0.80", rep.da);
    assert!(rep.ca >= 0.50, "CA {:.3} < 0.50", rep.ca);
    println!(
        "criterion 05 dense accuracy: PASS (DA {:.3}, CA {:.3}, e_com {:.3})",
        rep.da, rep.ca, rep.e_com
    );
}

// ---------------------------------------------------------------------
// 6. detector ranking
// ---------------------------------------------------------------------

#[test]
fn criterion_06_detector_ranking() {
    let detectors = [
        DetectorKind::TopHat { se_radius: 8 },
        DetectorKind::FixedWindow { size: 3 },
        DetectorKind::FixedWindow { size: 7 },
        DetectorKind::FixedWindow { size: 11 },
        DetectorKind::FixedWindow { size: 15 },
        DetectorKind::FixedWindow { size: 19 },
        DetectorKind::SlopeBreak,
    ];
    for spec in [sparse_scene(), dense_scene()] {
        let scene = generate(&spec).unwrap();
        let rows = run_benchmark(
            &scene.dsm,
            &scene.raster,
            &PipelineParams::default(),
            &detectors,
            &scene.truth_crowns,
        )
        .unwrap();
        let th = &rows[0];
        for row in &rows[1..6] {
            assert!(
                th.f >= row.f,
                "{}: top-hat F {:.3} below {} F {:.3}",
                spec.density_mode.name(),
                th.f,
                row.detector,
                row.f
            );
        }
        let sb = &rows[6];
        for row in &rows[..6] {
            assert!(
                sb.da <= row.da,
                "{}: slope-break DA {:.3} not the lowest (vs {} {:.3})",
                spec.density_mode.name(),
                sb.da,
                row.detector,
                row.da
            );
        }
        println!(
            "criterion 06 detector ranking [{}]: PASS (TH F {:.3}; fixed-window F {:?}; SB DA {:.3})",
            spec.density_mode.name(),
            th.f,
            rows[1..6].iter().map(|r| (r.detector.clone(), r.f)).collect::<Vec<_>>(),
            sb.da
        );
    }
    println!("criterion 06 detector ranking: PASS");
}

// ---------------------------------------------------------------------
// 7. robustness without a DTM
// ---------------------------------------------------------------------

#[test]
fn criterion_07_dtm_less_robustness() {
    let scene = generate(&dense_scene()).unwrap();
    let mut params = PipelineParams::default();
    let run = |params: &PipelineParams| {
        run_scene_pipeline(&scene.dsm, &scene.raster, params, Some(&scene.truth_crowns))
            .unwrap()
            .report
            .unwrap()
    };
    let dtm_da = run(&params).da;
    let mut results = Vec::new();
    for (label, mode) in [
        ("C_10", HeightMode::Constant(10.0)),
        ("L_13", HeightMode::LowestPoint(13.0)),
        ("L_15", HeightMode::LowestPoint(15.0)),
    ] {
        params.height_mode = mode;
        let da = run(&params).da;
        assert!(
            dtm_da - da <= 0.10,
            "{} loses {:.3} DA (DTM {:.3} vs {:.3})",
            label,
            dtm_da - da,
            dtm_da,
            da
        );
        results.push((label, da));
    }
    println!(
        "criterion 07 DTM-less robustness: PASS (DTM DA {:.3}; {:?})",
        dtm_da, results
    );
}

// ---------------------------------------------------------------------
// 8. delineation equals the exhaustive argmin oracle
// ---------------------------------------------------------------------

#[test]
fn criterion_08_superpixel_oracle() {
    let mut rng = Lcg(0xACE);
    for trial in 0..50 {
        let w = 32 + (rng.next() % 33) as usize; // up to 64
        let h = 32 + (rng.next() % 33) as usize;
        let cell = 0.3;
        let mut dsm = Grid::filled(w, h, cell, 0.0);
        for i in 0..dsm.len() {
            dsm.values_mut()[i] = rng.uniform() * 15.0;
        }
        let mut red = Grid::filled(w, h, cell, 0.0);
        let mut nir = Grid::filled(w, h, cell, 0.0);
        for i in 0..red.len() {
            red.values_mut()[i] = 0.05 + 0.2 * rng.uniform();
            nir.values_mut()[i] = 0.3 + 0.4 * rng.uniform();
        }
        let mut raster = MultibandRaster::new(red);
        raster.push_band(nir).unwrap();
        raster
            .assign_role(crownseg_core::raster::BandRole::Red, 0)
            .unwrap();
        raster
            .assign_role(crownseg_core::raster::BandRole::Nir, 1)
            .unwrap();
        let mut veg = Mask::like(&dsm);
        for r in 0..h {
            for c in 0..w {
                if rng.uniform() < 0.8 {
                    veg.set(r, c, true);
                }
            }
        }
        let n_tops = 1 + (rng.next() % 6) as usize;
        let mut tops: Vec<TreetopCandidate> = Vec::new();
        while tops.len() < n_tops {
            let row = (rng.next() % h as u64) as usize;
            let col = (rng.next() % w as u64) as usize;
            if tops.iter().any(|t| t.row == row && t.col == col) {
                continue;
            }
            let above = 3.0 + rng.uniform() * 20.0;
            tops.push(TreetopCandidate {
                row,
                col,
                dsm_height: dsm.get(row, col),
                above_ground: above,
                crown_diameter: allometric_diameter(above).unwrap(),
            });
        }
        let params = SegmentationParams::default();
        let norms = scene_norms(&tops, &raster, &veg);
        let got = assign_labels(&tops, &dsm, &raster, &veg, &params, &norms).unwrap();

        let theta = params.effective_theta();
        let mut expected = vec![0u32; w * h];
        for r in 0..h {
            for c in 0..w {
                if !veg.get(r, c) {
                    continue;
                }
                let mut best = f64::INFINITY;
                let mut best_id = 0u32;
                for (i, top) in tops.iter().enumerate() {
                    let dr = (top.row as f64 - r as f64) * cell;
                    let dc = (top.col as f64 - c as f64) * cell;
                    if (dr * dr + dc * dc).sqrt() > 2.0 * top.crown_diameter {
                        continue;
                    }
                    let d = kernel_distance(top, (r, c), &dsm, &raster, &norms, &params);
                    if d <= theta && d < best {
                        best = d;
                        best_id = i as u32 + 1;
                    }
                }
                expected[r * w + c] = best_id;
            }
        }
        assert_eq!(
            got, expected,
            "trial {} ({}x{}, {} tops)",
            trial, w, h, n_tops
        );
    }
    println!("criterion 08 superpixel argmin oracle: PASS (50 random configurations)");
}

// ---------------------------------------------------------------------
// 9. growing theta never shrinks a segment
// ---------------------------------------------------------------------

#[test]
fn criterion_09_theta_monotonicity() {
    let mut rng = Lcg(0xF00D);
    for trial in 0..100 {
        let spec = SceneSpec {
            width: 96,
            height: 96,
            n_trees: 2 + (rng.next() % 5) as usize,
            density_mode: DensityMode::Dense,
            rng_seed: 1000 + trial,
            ..SceneSpec::default()
        };
        let scene = generate(&spec).unwrap();
        let veg = crownseg_core::raster::vegetation_mask(
            &crownseg_core::raster::ndvi(&scene.raster).unwrap(),
            0.3,
        );
        let norms = scene_norms(&scene.truth_tops, &scene.raster, &veg);
        let t1 = 0.2 + rng.uniform();
        let t2 = t1 + 0.1 + rng.uniform();
        let run = |theta: f64| {
            let params = SegmentationParams {
                theta: Some(theta),
                ..Default::default()
            };
            delineate(
                &scene.truth_tops,
                &scene.dsm,
                &scene.raster,
                &veg,
                &params,
                &norms,
            )
            .unwrap()
            .0
        };
        let small = run(t1);
        let large = run(t2);
        for k in 0..small.len() {
            if small[k] > 0 {
                assert_eq!(
                    small[k], large[k],
                    "trial {}: pixel {} left its segment when theta grew {:.2} -> {:.2}",
                    trial, k, t1, t2
                );
            }
        }
    }
    println!("criterion 09 theta monotonicity: PASS (100 randomized trials)");
}

// ---------------------------------------------------------------------
// 10. cloth simulation sanity
// ---------------------------------------------------------------------

#[test]
fn criterion_10_csf_sanity() {
    let cell = 0.5;
    let apexes = [(40usize, 40usize), (90, 60), (60, 100)];

    let build = |slope_deg: f64| {
        let slope = slope_deg.to_radians().tan();
        let mut dsm = Grid::filled(128, 128, cell, 0.0);
        let mut ground = Mask::filled(&dsm, true);
        for r in 0..128 {
            for c in 0..128 {
                dsm.set(r, c, c as f64 * cell * slope);
            }
        }
        for &(ar, ac) in &apexes {
            let radius_px = 3.0 / cell;
            for r in 0..128i64 {
                for c in 0..128i64 {
                    let d = (((r - ar as i64).pow(2) + (c - ac as i64).pow(2)) as f64).sqrt();
                    if d <= radius_px {
                        let z = dsm.get(ar, ac) + 10.0 * (1.0 - 0.5 * (d / radius_px).powi(2));
                        dsm.set(r as usize, c as usize, z);
                        ground.set(r as usize, c as usize, false);
                    }
                }
            }
        }
        (dsm, ground)
    };

    for slope_deg in [0.0, 5.0] {
        let (dsm, ground) = build(slope_deg);
        let params = CsfParams {
            rigidness: 3,
            ..CsfParams::default()
        };
        let mask = csf_classify(&dsm, &params).unwrap();
        let mut ground_total = 0;
        let mut ground_hit = 0;
        for r in 0..128 {
            for c in 0..128 {
                if ground.get(r, c) {
                    ground_total += 1;
                    if mask.get(r, c) {
                        ground_hit += 1;
                    }
                }
            }
        }
        let frac = ground_hit as f64 / ground_total as f64;
        assert!(
            frac >= 0.99,
            "slope {}: only {:.4} of true ground classified terrain",
            slope_deg,
            frac
        );
        for &(ar, ac) in &apexes {
            assert!(
                !mask.get(ar, ac),
                "slope {}: crown apex ({}, {}) classified terrain",
                slope_deg,
                ar,
                ac
            );
        }
        println!(
            "criterion 10 CSF sanity [{}\u{b0}]: ground fraction {:.4}, apexes off-terrain",
            slope_deg, frac
        );
    }
    println!("criterion 10 CSF sanity: PASS");
}

// ---------------------------------------------------------------------
// 11. determinism and wall-clock budget on a large scene
// ---------------------------------------------------------------------

#[test]
fn criterion_11_determinism_and_performance() {
    let spec = SceneSpec {
        width: 1024,
        height: 1024,
        n_trees: 180,
        density_mode: DensityMode::Sparse,
        rng_seed: 3,
        ..SceneSpec::default()
    };
    let dir_a = std::env::temp_dir().join("crownseg-acceptance-a");
    let dir_b = std::env::temp_dir().join("crownseg-acceptance-b");

    let start = Instant::now();
    let scene = generate(&spec).unwrap();
    let out = run_scene_pipeline(
        &scene.dsm,
        &scene.raster,
        &PipelineParams::default(),
        Some(&scene.truth_crowns),
    )
    .unwrap();
    write_artifacts(&dir_a, &scene.dsm, &out).unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 60.0, "single run took {:.1}s, budget 60s", secs);

    let scene_b = generate(&spec).unwrap();
    let out_b = run_scene_pipeline(
        &scene_b.dsm,
        &scene_b.raster,
        &PipelineParams::default(),
        Some(&scene_b.truth_crowns),
    )
    .unwrap();
    write_artifacts(&dir_b, &scene_b.dsm, &out_b).unwrap();

    for name in [
        "treetops.csv",
        "crown_labels.asc",
        "crowns.json",
        "terrain_mask.asc",
        "stage_counts.csv",
        "metrics.csv",
    ] {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{} must be byte-identical across runs", name);
    }
    println!(
        "criterion 11 determinism and performance: PASS (1024x1024 run in {:.1}s, artifacts byte-identical)",
        secs
    );
}
