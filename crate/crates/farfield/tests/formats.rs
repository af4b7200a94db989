use farfield::binfmt::{decode_activity, decode_embeddings, encode_activity, encode_embeddings, read_vad_mask, write_activity};
use farfield::rttm::{format_rttm, parse_rttm};
use farfield::wav::{read_wav, write_wav, WavFormat};
use farfield_core::diarize::{EmbeddingEntry, EmbeddingSet};
use farfield_core::fusion::SoftActivity;
use farfield_core::{MultichannelAudio, Segmentation, Turn};
use proptest::prelude::*;
use tempfile::TempDir;

fn turns() -> impl Strategy<Value = Vec<Turn>> {
    prop::collection::vec((0usize..4, 0u32..100_000, 1u32..20_000), 0..30).prop_map(|v| {
        v.into_iter()
            .map(|(s, start, dur)| Turn::new(format!("spk{s}"), start as f64 / 1000.0, (start + dur) as f64 / 1000.0))
            .collect()
    })
}

fn sorted(mut t: Vec<Turn>) -> Vec<(String, u64, u64)> {
    let mut v: Vec<_> = t
        .drain(..)
        .map(|t| (t.speaker, (t.start * 1000.0).round() as u64, (t.end * 1000.0).round() as u64))
        .collect();
    v.sort();
    v
}

proptest! {
    #[test]
    fn rttm_round_trips_millisecond_turns(t in turns()) {
        let seg = Segmentation::new("sess-1", t.clone()).unwrap();
        let parsed = parse_rttm(&format_rttm(&seg)).unwrap();
        let back = parsed.get("sess-1").cloned().unwrap_or_else(|| Segmentation::empty("sess-1"));
        prop_assert_eq!(sorted(back.turns), sorted(t));
    }

    #[test]
    fn embeddings_round_trip(
        dim in 1usize..8,
        entries in prop::collection::vec((0u32..1000, 1u32..50, 1usize..3), 0..10),
        seed in any::<u64>(),
    ) {
        let mut k = seed;
        let mut next = || { k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); ((k >> 40) as f32 / (1u32 << 24) as f32) as f64 - 0.5 };
        let mut entries = entries;
        entries.sort();
        let e: Vec<EmbeddingEntry> = entries
            .iter()
            .map(|&(s, d, n)| {
                let vecs = (0..n).map(|_| (0..dim).map(|_| next()).collect()).collect();
                EmbeddingEntry::new(s as f64 * 0.1, (s + d) as f64 * 0.1, vecs)
            })
            .collect();
        let set = EmbeddingSet::new(dim, e, "t").unwrap();
        let back = decode_embeddings(&encode_embeddings(&set), "t").unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn activity_round_trips_at_f32_precision(rows in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 7), 1..5)) {
        let a = SoftActivity::new("s", rows, 0.1).unwrap();
        let back = decode_activity(&encode_activity(&a), "s").unwrap();
        prop_assert_eq!(back.frame_step, 0.1);
        for (r, q) in a.probs.iter().zip(&back.probs) {
            for (x, y) in r.iter().zip(q) {
                prop_assert!((x - y).abs() <= 1e-7);
            }
        }
    }
}

#[test]
fn malformed_binaries_are_rejected() {
    let set = EmbeddingSet::new(2, vec![EmbeddingEntry::new(0.0, 1.0, vec![vec![0.5, 0.25]])], "t").unwrap();
    let bytes = encode_embeddings(&set);
    assert!(decode_embeddings(&bytes[..bytes.len() - 1], "t").is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_embeddings(&extra, "t").is_err());
    let mut magic = bytes;
    magic[0] = b'X';
    assert!(decode_embeddings(&magic, "t").is_err());
    let act = encode_activity(&SoftActivity::new("s", vec![vec![0.2, 0.4]], 0.1).unwrap());
    assert!(decode_activity(&act[..act.len() - 2], "s").is_err());
    assert!(decode_activity(b"EMB1", "s").is_err());
}

#[test]
fn malformed_rttm_lines_are_reported() {
    assert!(parse_rttm("SPEAKER a 1 0.0\n").is_err());
    assert!(parse_rttm("SPEAKER a 1 x 1.0 <NA> <NA> s <NA> <NA>\n").is_err());
    assert!(parse_rttm("SPEAKER a 1 -1 1.0 <NA> <NA> s <NA> <NA>\n").is_err());
    let ok = parse_rttm("SPKR-INFO a 1 <NA> <NA> <NA> unknown s <NA> <NA>\nSPEAKER a 1 0.5 0 <NA> <NA> s <NA> <NA>\n").unwrap();
    assert!(ok["a"].turns.is_empty());
}

#[test]
fn wav_round_trip_and_vad_mask() {
    let dir = TempDir::new().unwrap();
    let audio = MultichannelAudio::new(vec![vec![0.5, -0.25, 0.125], vec![0.0, 1.0, -1.0]], 16000).unwrap();
    let f = dir.path().join("a.wav");
    write_wav(&f, &audio, WavFormat::Float32).unwrap();
    assert_eq!(read_wav(&f).unwrap(), audio);
    let p = dir.path().join("b.wav");
    write_wav(&p, &audio, WavFormat::Pcm16).unwrap();
    let back = read_wav(&p).unwrap();
    for c in 0..2 {
        for (x, y) in audio.channel(c).iter().zip(back.channel(c)) {
            assert!((x - y).abs() < 1.0 / 16384.0);
        }
    }
    assert!(read_wav(&dir.path().join("missing.wav")).is_err());

    let m = dir.path().join("m.act");
    write_activity(&m, &SoftActivity::new("s", vec![vec![0.0, 0.5, 1.0]], 0.1).unwrap()).unwrap();
    assert_eq!(read_vad_mask(&m).unwrap(), vec![vec![false, true, true]]);
}
