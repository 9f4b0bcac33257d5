use ahgmm::baselines::optimal_kernel;
use ahgmm::dataset::{layout_dataset, Manifest, DEFAULT_FACTORS};
use ahgmm::evaluation::attack_knowledge;
use ahgmm::geometry::density_from_face_pixels;
use ahgmm::imageio::to_bytes;
use ahgmm::metrics::psnr;
use ahgmm::synth::synthetic_face;
use ahgmm::{
    attack_inverse, attack_parrot_transform, filter_agb, filter_ahgmm, AdversaryModel,
    DensityThreshold, FaceRegion, HoppingConfig, ImagePlane, Seed,
};

fn setup(size: usize) -> (ImagePlane, FaceRegion, ahgmm::PixelDensity, DensityThreshold) {
    (
        synthetic_face(size, 11),
        FaceRegion::full(size, size),
        density_from_face_pixels(size as f64, 0.0).unwrap(),
        DensityThreshold::uniform(0.5).unwrap(),
    )
}

#[test]
fn more_knowledge_gives_better_reconstructions() {
    let row = attack_knowledge(24, 48, 0.5, 1e-2, &Seed::from_u64(3)).unwrap();
    assert!(row.accurate_mse <= row.pseudo_mse, "{row:?}");
    assert!(row.pseudo_mse <= row.wrong_sigma_mse, "{row:?}");
}

#[test]
fn accurate_parrot_reproduces_the_protected_image() {
    let (img, face, d, thr) = setup(48);
    let cfg = HoppingConfig::new(Seed::from_u64(9));
    let protected = filter_ahgmm(&img, &face, &d, &thr, &cfg).unwrap().0;
    let accurate = attack_parrot_transform(&img, &face, &AdversaryModel::accurate(cfg.clone()), &d, &thr).unwrap();
    assert_eq!(to_bytes(&accurate), to_bytes(&protected));

    let mut guess = cfg.clone();
    guess.seed = cfg.seed.flip_bit(0);
    let pseudo = attack_parrot_transform(&img, &face, &AdversaryModel::pseudo(guess), &d, &thr).unwrap();
    assert_ne!(to_bytes(&pseudo), to_bytes(&protected));

    let optimal = attack_parrot_transform(&img, &face, &AdversaryModel::optimal(), &d, &thr).unwrap();
    assert_eq!(optimal, filter_agb(&img, &face, &d, &thr).unwrap());
}

#[test]
fn optimal_attack_undoes_agb_better_than_ahgmm() {
    let (img, face, d, thr) = setup(64);
    let sigma_o = optimal_kernel(&d, &thr).unwrap();
    let cfg = HoppingConfig::new(Seed::from_u64(5));
    let agb = filter_agb(&img, &face, &d, &thr).unwrap();
    let ahgmm = filter_ahgmm(&img, &face, &d, &thr, &cfg).unwrap().0;
    let adv = AdversaryModel::optimal();
    let rec_agb = attack_inverse(&agb, &face, &adv, &sigma_o, 1e-4).unwrap();
    let rec_ahgmm = attack_inverse(&ahgmm, &face, &adv, &sigma_o, 1e-4).unwrap();
    assert!(psnr(&img, &rec_agb).unwrap() > psnr(&img, &rec_ahgmm).unwrap());
}

#[test]
fn faces_below_threshold_pass_through() {
    let (img, face, d, _) = setup(12);
    let thr = DensityThreshold::uniform(2.0).unwrap();
    let cfg = HoppingConfig::new(Seed::from_u64(1));
    let (out, report) = filter_ahgmm(&img, &face, &d, &thr, &cfg).unwrap();
    assert!(!report.gated);
    assert_eq!(out, img);
    let parrot = attack_parrot_transform(&img, &face, &AdversaryModel::accurate(cfg), &d, &thr).unwrap();
    assert_eq!(parrot, img);
}

#[test]
fn report_never_contains_the_key() {
    let (img, face, d, thr) = setup(32);
    let seed = Seed::from_hex("feedfacecafebeef").unwrap();
    let report = filter_ahgmm(&img, &face, &d, &thr, &HoppingConfig::new(seed.clone())).unwrap().1;
    let json = serde_json::to_string(&report).unwrap();
    assert!(!json.contains("feedfacecafebeef"));
    assert_eq!(report.seed_fingerprint.as_deref(), Some(seed.fingerprint().as_str()));
}

#[test]
fn dataset_layout_matches_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let images = vec![("a".to_string(), synthetic_face(96, 1)), ("b".to_string(), synthetic_face(96, 2))];
    let path = layout_dataset(dir.path(), &images, &DEFAULT_FACTORS, &[0, 30, 60]).unwrap();
    let manifest = Manifest::load(&path).unwrap();
    assert_eq!(manifest.entries.len(), 2 * 5 * 3);
    assert_eq!(manifest.provenance.sources.len(), 2);
    let pngs = walk_pngs(dir.path());
    assert_eq!(pngs, 30);
    assert_eq!(manifest.entries.iter().filter(|e| e.inherently_protected).count(), 6);
}

fn walk_pngs(root: &std::path::Path) -> usize {
    std::fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| if p.is_dir() { walk_pngs(&p) } else { usize::from(p.extension().is_some_and(|e| e == "png")) })
        .sum()
}
