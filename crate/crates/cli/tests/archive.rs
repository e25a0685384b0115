use meanfield_cli::{ArchiveKind, ArchiveMeta, CliError, TrialArchive};
use ndarray::{array, Array2};
use proptest::prelude::*;

/// Bitwise reflected CRC-32 (polynomial 0xEDB88320), no tables.
fn crc32_oracle(bytes: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 == 1 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
        }
    }
    !crc
}

/// Builds a covariance archive byte by byte from the documented layout.
fn hand_archive(n_classes: u32, labels: &[u32], dim: u32, values: &[f64]) -> Vec<u8> {
    let mut b = b"SPDT".to_vec();
    b.extend([1, 0, 0, 0]);
    b.push(1);
    b.extend((labels.len() as u32).to_le_bytes());
    b.extend(n_classes.to_le_bytes());
    b.extend(dim.to_le_bytes());
    for l in labels {
        b.extend(l.to_le_bytes());
    }
    for v in values {
        b.extend(v.to_le_bytes());
    }
    let crc = crc32_oracle(&b);
    b.extend(crc.to_le_bytes());
    b
}

fn parse(bytes: &[u8]) -> Result<TrialArchive, CliError> {
    TrialArchive::from_bytes(bytes, ArchiveMeta::default())
}

#[test]
fn hand_built_file_parses_to_the_hand_matrix() {
    let bytes = hand_archive(1, &[0], 2, &[4.0, -1.5, -1.5, 2.25]);
    let a = parse(&bytes).unwrap();
    assert_eq!(a.kind, ArchiveKind::Covariance);
    assert_eq!(a.trials[0], array![[4.0, -1.5], [-1.5, 2.25]]);
    assert_eq!(a.to_bytes().unwrap(), bytes);
}

#[test]
fn empty_archive_is_corrupt() {
    let bytes = hand_archive(1, &[], 2, &[]);
    assert!(matches!(parse(&bytes), Err(CliError::CorruptArchive { offset: 9, .. })));
}

#[test]
fn label_out_of_range_reports_its_offset() {
    let bytes = hand_archive(2, &[0, 2], 1, &[1.0, 2.0]);
    match parse(&bytes) {
        Err(CliError::CorruptArchive { offset, .. }) => assert_eq!(offset, 21 + 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn asymmetric_and_non_finite_payloads() {
    let asym = hand_archive(1, &[0], 2, &[2.0, 0.5, 0.4, 2.0]);
    match parse(&asym) {
        Err(CliError::CorruptArchive { offset, .. }) => assert_eq!(offset, 25 + 8),
        other => panic!("{other:?}"),
    }
    let nan = hand_archive(1, &[0], 2, &[2.0, 0.0, 0.0, f64::NAN]);
    match parse(&nan) {
        Err(CliError::CorruptArchive { offset, .. }) => assert_eq!(offset, 25 + 24),
        other => panic!("{other:?}"),
    }
    // asymmetry below 1e-10 relative is accepted and kept as written
    let tiny = hand_archive(1, &[0], 2, &[2.0, 0.5, 0.5 + 1e-13, 2.0]);
    assert_eq!(parse(&tiny).unwrap().to_bytes().unwrap(), tiny);
}

#[test]
fn magic_and_version_are_checked() {
    let mut bytes = hand_archive(1, &[0], 1, &[1.0]);
    bytes[0] = b'X';
    assert!(matches!(parse(&bytes), Err(CliError::UnsupportedFormat(_))));
    let mut bytes = hand_archive(1, &[0], 1, &[1.0]);
    bytes[4] = 2;
    assert!(matches!(parse(&bytes), Err(CliError::UnsupportedFormat(_))));
}

#[test]
fn file_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let trials = vec![Array2::from_shape_fn((3, 5), |(i, j)| (i * 5 + j) as f64 * 0.1 - 0.7); 2];
    let a = TrialArchive::new(ArchiveKind::TimeSeries, 2, vec![1, 0], trials).unwrap();
    let p = dir.path().join("sub-1_ses-a.spdt");
    meanfield_cli::write_archive(&a, &p).unwrap();
    let first = std::fs::read(&p).unwrap();
    let back = meanfield_cli::read_archive(&p, "d").unwrap();
    assert_eq!(back.meta.subject, "1");
    assert_eq!(back.meta.session, "a");
    meanfield_cli::write_archive(&back, &p).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), first);
}

proptest! {
    #[test]
    fn random_time_series_round_trip(
        rows in 1usize..5,
        cols in 1usize..6,
        n in 1usize..4,
        values in prop::collection::vec(-1e6f64..1e6, 120),
    ) {
        let trials: Vec<Array2<f64>> = (0..n)
            .map(|t| Array2::from_shape_fn((rows, cols), |(i, j)| values[(t * 30 + i * 6 + j) % 120]))
            .collect();
        let labels = (0..n as u32).collect();
        let a = TrialArchive::new(ArchiveKind::TimeSeries, n as u32, labels, trials).unwrap();
        let bytes = a.to_bytes().unwrap();
        prop_assert_eq!(&crc32_oracle(&bytes[..bytes.len() - 4]).to_le_bytes()[..], &bytes[bytes.len() - 4..]);
        let back = parse(&bytes).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }
}
