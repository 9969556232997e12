use std::collections::BTreeMap;

use chromaflow::pipeline::{self, PipelineConfig, TransferJob};
use chromaflow::regions::{Correspondence, CorrespondenceSet, RegionMask};
use chromaflow::synth;
use chromaflow::{Error, RgbImage};

fn max_abs_diff(a: &RgbImage, b: &RgbImage) -> u8 {
    a.pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| (0..3).map(move |c| p[c].abs_diff(q[c])))
        .max()
        .unwrap()
}

#[test]
fn identity_transfer_returns_the_source() {
    let job = synth::identity_job(64, 64, 5);
    let out = pipeline::run(&job).unwrap();
    assert!(max_abs_diff(&out.image, &job.source) <= 1);
    assert!(out.report.all_converged());
}

#[test]
fn full_sampling_is_deterministic() {
    let mut job = synth::two_patch_job(32, 32, 3);
    job.config.beta = 1.0;
    let a = pipeline::run(&job).unwrap();
    let b = pipeline::run(&job).unwrap();
    assert_eq!(a.image, b.image);
    assert_eq!(a.report, b.report);
}

#[test]
fn two_patch_recolors_right_and_keeps_left() {
    let job = synth::two_patch_job(64, 64, 0);
    let out = pipeline::run(&job).unwrap();
    let right = &job.set.correspondences[0].source_region;
    let left = &job.set.keep_regions[0];
    let target = &job.targets["cool"];
    let target_mean = synth::region_mean_rgb(target, &job.set.correspondences[0].target_region);
    let got = synth::region_mean_rgb(&out.image, right);
    let before = synth::region_mean_rgb(&job.source, left);
    let after = synth::region_mean_rgb(&out.image, left);
    for c in 0..3 {
        assert!((got[c] - target_mean[c]).abs() <= 2.0, "right patch channel {c}: {got:?} vs {target_mean:?}");
        assert!((after[c] - before[c]).abs() < 2.0, "left patch channel {c}");
    }
}

#[test]
fn preview_dimension_contract() {
    let job = synth::identity_job(512, 512, 2);
    let out = pipeline::preview(&job, 64).unwrap();
    assert_eq!(out.image.dims(), (64, 64));
    // Downscaled identity is still identity.
    let small = chromaflow::resample::downscale_rgb(&job.source, 64, 64);
    assert!(max_abs_diff(&out.image, &small) <= 1);
    assert!(matches!(pipeline::preview(&job, 16), Err(Error::InvalidConfig(_))));
}

#[test]
fn preview_at_full_size_equals_run() {
    let job = synth::two_patch_job(40, 40, 1);
    let a = pipeline::preview(&job, 64).unwrap();
    let b = pipeline::run(&job).unwrap();
    assert_eq!(a.image, b.image);
}

/// Two distant color clusters edited separately and together.
#[test]
fn multi_target_edits_do_not_bleed() {
    let (w, h) = (64, 48);
    let left = RegionMask::rect(w, h, 0, 0, w / 2, h);
    let right = RegionMask::rect(w, h, w / 2, 0, w, h);
    let green = synth::noisy_patch(30, 30, [60, 170, 70], 8, 11);
    let purple = synth::noisy_patch(20, 20, [150, 60, 170], 8, 12);
    let source = synth::two_patch(w, h, 4);
    let pair = |region: &RegionMask, id: &str, target: &RgbImage| Correspondence {
        source_region: region.clone(),
        target_id: id.into(),
        target_region: RegionMask::rect(target.width(), target.height(), 0, 0, target.width(), target.height()),
    };
    let targets = BTreeMap::from([("g".to_string(), green.clone()), ("p".to_string(), purple.clone())]);
    let job_with = |pairs: Vec<Correspondence>| TransferJob {
        source: source.clone(),
        targets: targets.clone(),
        set: CorrespondenceSet::new(pairs, vec![]),
        config: PipelineConfig::default(),
    };
    // Shrink the edited areas so both clusters keep unconstrained pixels.
    let inner_l = RegionMask::rect(w, h, 4, 4, w / 2 - 4, h - 4);
    let inner_r = RegionMask::rect(w, h, w / 2 + 4, 4, w - 4, h - 4);
    let both = pipeline::run(&job_with(vec![pair(&inner_l, "g", &green), pair(&inner_r, "p", &purple)])).unwrap();
    let only_l = pipeline::run(&job_with(vec![pair(&inner_l, "g", &green)])).unwrap();
    let only_r = pipeline::run(&job_with(vec![pair(&inner_r, "p", &purple)])).unwrap();
    let shift = |out: &RgbImage, m: &RegionMask| {
        let a = synth::region_mean_rgb(out, m);
        let b = synth::region_mean_rgb(&source, m);
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    };
    for c in 0..3 {
        assert!((shift(&both.image, &left)[c] - shift(&only_l.image, &left)[c]).abs() <= 4.0);
        assert!((shift(&both.image, &right)[c] - shift(&only_r.image, &right)[c]).abs() <= 4.0);
    }
}

#[test]
fn few_landmarks_clamp_k() {
    // Four distinct colors: k = 21 must shrink to 3.
    let source = RgbImage::from_fn(8, 8, |x, y| match (x < 4, y < 4) {
        (true, true) => [200, 30, 30],
        (true, false) => [30, 200, 30],
        (false, true) => [30, 30, 200],
        (false, false) => [220, 220, 40],
    })
    .unwrap();
    let target = synth::noisy_patch(10, 10, [90, 90, 90], 0, 0);
    let job = TransferJob {
        targets: BTreeMap::from([("t".to_string(), target)]),
        set: CorrespondenceSet::new(
            vec![Correspondence {
                source_region: RegionMask::rect(8, 8, 0, 0, 4, 4),
                target_id: "t".into(),
                target_region: RegionMask::rect(10, 10, 0, 0, 10, 10),
            }],
            vec![],
        ),
        source,
        config: PipelineConfig::default(),
    };
    let out = pipeline::run(&job).unwrap();
    assert_eq!(out.k_used, 3);
    assert_eq!(out.landmark_count, 4);
    assert_eq!(out.image.get(0, 0), [90, 90, 90]);
}

#[test]
fn constant_source_is_a_single_landmark() {
    let source = synth::noisy_patch(16, 16, [10, 120, 240], 0, 0);
    let target = synth::noisy_patch(8, 8, [250, 250, 10], 0, 0);
    let job = TransferJob {
        targets: BTreeMap::from([("t".to_string(), target)]),
        set: CorrespondenceSet::new(
            vec![Correspondence {
                source_region: RegionMask::rect(16, 16, 0, 0, 4, 4),
                target_id: "t".into(),
                target_region: RegionMask::rect(8, 8, 0, 0, 8, 8),
            }],
            vec![],
        ),
        source,
        config: PipelineConfig::default(),
    };
    let out = pipeline::run(&job).unwrap();
    assert_eq!(out.landmark_count, 1);
    assert!(out.image.pixels().iter().all(|&p| p == [250, 250, 10]));
}

#[test]
fn flat_color_cloud_falls_back_to_full_sampling() {
    let source = RgbImage::from_fn(24, 24, |x, y| [((x * 10 + y) % 256) as u8; 3]).unwrap();
    let target = synth::noisy_patch(8, 8, [40, 40, 40], 3, 0);
    let job = TransferJob {
        targets: BTreeMap::from([("t".to_string(), target)]),
        set: CorrespondenceSet::new(
            vec![Correspondence {
                source_region: RegionMask::rect(24, 24, 0, 0, 6, 24),
                target_id: "t".into(),
                target_region: RegionMask::rect(8, 8, 0, 0, 8, 8),
            }],
            vec![],
        ),
        source,
        config: PipelineConfig::default(),
    };
    let out = pipeline::run(&job).unwrap();
    assert_eq!(out.beta_used, 1.0);
}

#[test]
fn errors_carry_the_stage() {
    let mut job = synth::two_patch_job(16, 16, 0);
    job.set.correspondences[0].target_id = "missing".into();
    let err = pipeline::run(&job).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "validate", .. }));
    assert!(matches!(err.root(), Error::UnknownTarget(_)));
    assert!(err.to_string().starts_with("validate: "));

    let mut job = synth::two_patch_job(16, 16, 0);
    job.config.beta = 0.0;
    assert!(matches!(pipeline::run(&job).unwrap_err().root(), Error::BetaOutOfRange(_)));
}

#[test]
fn job_files_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let job = synth::two_patch_job(24, 20, 9);
    chromaflow::job::write_job(&job, dir).unwrap();
    let loaded = chromaflow::job::JobSpec::read(dir.join("job.json")).unwrap().load().unwrap();
    assert_eq!(loaded.source, job.source);
    assert_eq!(loaded.targets, job.targets);
    assert_eq!(loaded.set, job.set);
    assert_eq!(loaded.config, job.config);
}
