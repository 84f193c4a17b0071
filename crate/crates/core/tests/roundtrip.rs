use skelgest::ingest::{generate_synthetic, load_dataset, write_dataset, SynthConfig};
use skelgest::skeleton::{JointIndexMap, DEFAULT_JOINT_NAMES};

fn default_map() -> JointIndexMap {
    JointIndexMap::new(DEFAULT_JOINT_NAMES.iter().map(|s| s.to_string()).collect(), 1).unwrap()
}

#[test]
fn written_dataset_loads_back_identically() {
    let ds = generate_synthetic(&SynthConfig::new(3, 11)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(dir.path(), &manifest, default_map()).unwrap();
    assert_eq!(back.sequences.len(), ds.sequences.len());
    for (a, b) in ds.sequences.iter().zip(&back.sequences) {
        assert_eq!((a.patient_id, a.label, a.correct), (b.patient_id, b.label, b.correct));
        assert_eq!(a.frames.len(), b.frames.len());
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            assert_eq!(fa.joints, fb.joints);
        }
    }
    assert_eq!(back.patients(), vec![1, 2, 3]);

    // Files always carry the auxiliary rows, so the loaded form is a fixed point.
    let again_dir = tempfile::tempdir().unwrap();
    let again_manifest = write_dataset(&back, again_dir.path()).unwrap();
    let again = load_dataset(again_dir.path(), &again_manifest, default_map()).unwrap();
    assert_eq!(again.sequences, back.sequences);
    assert_eq!(again.checksum(), back.checksum());
}

#[test]
fn writing_twice_gives_identical_bytes() {
    let ds = generate_synthetic(&SynthConfig::new(2, 5)).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = write_dataset(&ds, a.path()).unwrap();
    let mb = write_dataset(&ds, b.path()).unwrap();
    assert_eq!(std::fs::read(ma).unwrap(), std::fs::read(mb).unwrap());
    for e in std::fs::read_dir(a.path().join("frames")).unwrap() {
        let name = e.unwrap().file_name();
        assert_eq!(
            std::fs::read(a.path().join("frames").join(&name)).unwrap(),
            std::fs::read(b.path().join("frames").join(&name)).unwrap()
        );
    }
}

#[test]
fn different_seeds_give_different_data() {
    let a = generate_synthetic(&SynthConfig::new(2, 5)).unwrap();
    let b = generate_synthetic(&SynthConfig::new(2, 6)).unwrap();
    assert_ne!(a.checksum(), b.checksum());
}
