use std::fs;

use proptest::prelude::*;
use sleeplite::ingest::{
    load_annotated, map_stage_labels, parse_annotation_text, parse_csv, parse_edf, read_recording,
    write_annotations, write_csv, ReadOptions, RecordingFormat,
};
use sleeplite::{EcgRecording, Error, RawLabel, SleepStage};

struct Signal<'a> {
    label: &'a str,
    per_record: usize,
    phys: (f64, f64),
    dig: (i32, i32),
}

fn pad(s: &str, w: usize) -> Vec<u8> {
    let mut b = s.as_bytes().to_vec();
    b.resize(w, b' ');
    b
}

/// A minimal EDF writer; sample `k` of signal `s` is `(k * 7 + 131 * s) % 2000 - 1000`.
fn edf(signals: &[Signal], records: usize, duration_s: f64, declared: i64) -> Vec<u8> {
    let ns = signals.len();
    let mut h = Vec::new();
    h.extend(pad("0", 8));
    h.extend(pad("test patient", 80));
    h.extend(pad("test recording", 80));
    h.extend(pad("01.01.01", 8));
    h.extend(pad("00.00.00", 8));
    h.extend(pad(&(256 + 256 * ns).to_string(), 8));
    h.extend(pad("", 44));
    h.extend(pad(&declared.to_string(), 8));
    h.extend(pad(&duration_s.to_string(), 8));
    h.extend(pad(&ns.to_string(), 4));
    let fields: [(usize, Box<dyn Fn(&Signal) -> String>); 10] = [
        (16, Box::new(|s| s.label.to_string())),
        (80, Box::new(|_| String::new())),
        (8, Box::new(|_| "uV".into())),
        (8, Box::new(|s| s.phys.0.to_string())),
        (8, Box::new(|s| s.phys.1.to_string())),
        (8, Box::new(|s| s.dig.0.to_string())),
        (8, Box::new(|s| s.dig.1.to_string())),
        (80, Box::new(|_| String::new())),
        (8, Box::new(|s| s.per_record.to_string())),
        (32, Box::new(|_| String::new())),
    ];
    for (w, f) in &fields {
        for s in signals {
            h.extend(pad(&f(s), *w));
        }
    }
    assert_eq!(h.len(), 256 + 256 * ns);
    for r in 0..records {
        for (si, s) in signals.iter().enumerate() {
            for j in 0..s.per_record {
                let k = r * s.per_record + j;
                let d = ((k * 7 + 131 * si) % 2000) as i32 - 1000;
                h.extend((d as i16).to_le_bytes());
            }
        }
    }
    h
}

/// Sample count of the signal labelled `label`, walking the raw header.
fn header_walk(bytes: &[u8], label: &str) -> usize {
    let text = |a: usize, b: usize| {
        std::str::from_utf8(&bytes[a..b])
            .unwrap()
            .trim()
            .to_string()
    };
    let ns: usize = text(252, 256).parse().unwrap();
    let records: usize = text(236, 244).parse().unwrap();
    let idx = (0..ns)
        .position(|i| text(256 + i * 16, 256 + i * 16 + 16) == label)
        .unwrap();
    // labels 16, transducer 80, dimension 8, 4 ranges of 8, prefilter 80
    let spr_base = 256 + ns * (16 + 80 + 8 + 8 * 4 + 80);
    let spr: usize = text(spr_base + idx * 8, spr_base + idx * 8 + 8)
        .parse()
        .unwrap();
    records * spr
}

fn two_signals() -> Vec<Signal<'static>> {
    vec![
        Signal {
            label: "EEG C3-A2",
            per_record: 3840 * 2,
            phys: (-500.0, 500.0),
            dig: (-32768, 32767),
        },
        Signal {
            label: "ECG V2",
            per_record: 3840,
            phys: (-5.0, 5.0),
            dig: (-2048, 2047),
        },
    ]
}

#[test]
fn six_hour_edf_matches_header_walk() {
    let sigs = two_signals();
    let bytes = edf(&sigs, 720, 30.0, 720);
    let rec = parse_edf("s", &bytes, &ReadOptions::default()).unwrap();
    let expect = header_walk(&bytes, "ECG V2");
    assert_eq!(expect, 2_764_800);
    assert_eq!(rec.samples.len(), expect);
    assert_eq!(rec.sample_rate_hz, 128);
    assert_eq!(rec.complete_epochs(), 720);
    // first ECG sample: k = 0, signal 1 → digital 131 - 1000
    let gain = 10.0 / 4095.0;
    let want = -5.0 + (-869.0 + 2048.0) * gain;
    assert!((rec.samples[0] - want).abs() < 1e-12);
}

#[test]
fn edf_channel_selection() {
    let sigs = two_signals();
    let bytes = edf(&sigs, 2, 30.0, 2);
    let opts = ReadOptions {
        channel: Some("EEG C3-A2".into()),
        expected_rate_hz: None,
    };
    let eeg = parse_edf("s", &bytes, &opts).unwrap();
    assert_eq!(eeg.sample_rate_hz, 256);
    assert_eq!(eeg.samples.len(), header_walk(&bytes, "EEG C3-A2"));
    let missing = ReadOptions {
        channel: Some("EMG".into()),
        expected_rate_hz: None,
    };
    assert!(matches!(
        parse_edf("s", &bytes, &missing),
        Err(Error::ChannelNotFound(_))
    ));
}

#[test]
fn edf_unknown_record_count_and_truncation() {
    let sigs = two_signals();
    let bytes = edf(&sigs, 3, 30.0, -1);
    assert_eq!(
        parse_edf("s", &bytes, &ReadOptions::default())
            .unwrap()
            .samples
            .len(),
        3 * 3840
    );
    let bytes = edf(&sigs, 3, 30.0, 4);
    assert!(matches!(
        parse_edf("s", &bytes, &ReadOptions::default()),
        Err(Error::Truncated)
    ));
    assert!(matches!(
        parse_edf("s", &bytes[..100], &ReadOptions::default()),
        Err(Error::MalformedHeader(_))
    ));
}

#[test]
fn edf_rate_check_against_annotation_grid() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("n.edf");
    fs::write(&p, edf(&two_signals(), 2, 30.0, 2)).unwrap();
    let ok = ReadOptions {
        channel: None,
        expected_rate_hz: Some(128),
    };
    assert_eq!(
        read_recording(&p, RecordingFormat::Edf, &ok)
            .unwrap()
            .samples
            .len(),
        7680
    );
    let bad = ReadOptions {
        channel: None,
        expected_rate_hz: Some(256),
    };
    assert!(matches!(
        read_recording(&p, RecordingFormat::Edf, &bad),
        Err(Error::SampleRateMismatch(_))
    ));
}

#[test]
fn csv_examples() {
    let text = format!("sample_rate_hz=128\n{}", "0.5\n".repeat(3840));
    let r = parse_csv("s", &text).unwrap();
    assert_eq!(r.duration_s(), 30.0);
    assert!(matches!(
        parse_csv("s", "sample_rate_hz=0\n1\n"),
        Err(Error::SampleRateMismatch(_))
    ));
}

#[test]
fn annotation_examples() {
    let rec = EcgRecording::new("s", 128, vec![0.0; 21_600 * 128]).unwrap();
    let ann = parse_annotation_text(&"S2\n".repeat(720), &rec).unwrap();
    assert_eq!(ann.len(), 720);
    assert_eq!(ann[719].start_sample, 719 * 3840);
    assert!(matches!(
        parse_annotation_text(&"W ".repeat(721), &rec),
        Err(Error::AnnotationOverrun {
            labels: 721,
            epochs: 720
        })
    ));
    assert!(
        matches!(parse_annotation_text("W S5", &rec), Err(Error::UnknownLabel(t)) if t == "S5")
    );
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let samples: Vec<f64> = (0..3840 * 3)
        .map(|i| (i as f64 * 0.37).sin() / 3.0)
        .collect();
    let rec = EcgRecording::new("night", 128, samples)
        .unwrap()
        .with_labels(&[RawLabel::W, RawLabel::S4, RawLabel::Artifact])
        .unwrap();
    let csv = dir.path().join("night.csv");
    let lab = dir.path().join("night.txt");
    write_csv(&rec, &csv).unwrap();
    write_annotations(&rec.annotations, &lab).unwrap();
    let back = load_annotated(&csv, &lab, RecordingFormat::Csv, &ReadOptions::default()).unwrap();
    assert_eq!(back, rec);
    assert_eq!(back.annotations[1].mapped, Some(SleepStage::Deep));
    assert!(back.annotations[2].is_excluded());
}

fn raw_label() -> impl Strategy<Value = RawLabel> {
    prop::sample::select(vec![
        RawLabel::W,
        RawLabel::Rem,
        RawLabel::S1,
        RawLabel::S2,
        RawLabel::S3,
        RawLabel::S4,
        RawLabel::Artifact,
        RawLabel::Indeterminate,
    ])
}

proptest! {
    #[test]
    fn annotations_sit_on_the_epoch_grid(
        rate in prop::sample::select(vec![64u32, 100, 128, 256]),
        extra in 0usize..1000,
        labels in prop::collection::vec(raw_label(), 0..40),
    ) {
        let epochs = labels.len();
        let rec = EcgRecording::new("s", rate, vec![0.0; epochs * 30 * rate as usize + extra + 1]).unwrap();
        let text: Vec<&str> = labels.iter().map(|l| l.token()).collect();
        let ann = parse_annotation_text(&text.join("\n"), &rec).unwrap();
        prop_assert_eq!(ann.len(), epochs);
        for (i, a) in ann.iter().enumerate() {
            prop_assert_eq!(a.start_sample, i * 30 * rate as usize);
            prop_assert_eq!(a.start_sample % (30 * rate as usize), 0);
        }
        let once = map_stage_labels(&ann);
        prop_assert_eq!(map_stage_labels(&once), once.clone());
        for a in &once {
            prop_assert_eq!(a.mapped, a.raw_label.stage());
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact(
        rate in 1u32..1000,
        samples in prop::collection::vec(-1e6f64..1e6, 1..200),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let rec = EcgRecording::new("x", rate, samples).unwrap();
        write_csv(&rec, &p).unwrap();
        let back = read_recording(&p, RecordingFormat::Csv, &ReadOptions::default()).unwrap();
        prop_assert_eq!(back, rec);
    }
}
