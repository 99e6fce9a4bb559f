//! Corpus builder and manifest. WAVs are written at 48 kHz plus decimated
//! 24 kHz and 16 kHz views; the manifest is a line-delimited TSV with a
//! fixed field order, byte-identical across rebuilds with the same seed.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::audio::{decimate, save_wav};
use crate::error::{io_err, Error, Result};
use crate::synthdata::{
    child_seed, generate_script, generate_speaker, synthesize_utterance, SpeakerProfile,
    UtteranceScript,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Val => write!(f, "val"),
            Split::Test => write!(f, "test"),
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split {other:?}"))),
        }
    }
}

/// One corpus utterance: id, speaker, split, ground-truth F0, file paths
/// (relative to the corpus root) and the 48 kHz sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub utterance_id: String,
    pub speaker_id: usize,
    pub split: Split,
    pub base_f0: f64,
    pub wav48: String,
    pub wav24: String,
    pub wav16: String,
    pub samples48: usize,
}

/// Manifest plus the corpus root it was loaded from.
#[derive(Debug, Clone)]
pub struct CorpusManifest {
    pub root: PathBuf,
    pub rows: Vec<ManifestRow>,
    pub profiles: Vec<SpeakerProfile>,
}

const MANIFEST_HEADER: &str =
    "# utterance_id\tspeaker_id\tsplit\tbase_f0\twav48\twav24\twav16\tsamples48";

impl CorpusManifest {
    pub fn manifest_path(root: &Path) -> PathBuf {
        root.join("manifest.tsv")
    }

    pub fn save(&self) -> Result<()> {
        let mut out = String::new();
        out.push_str(MANIFEST_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.utterance_id,
                r.speaker_id,
                r.split,
                r.base_f0,
                r.wav48,
                r.wav24,
                r.wav16,
                r.samples48
            ));
        }
        let path = Self::manifest_path(&self.root);
        fs::write(&path, out).map_err(io_err(path))?;

        let profiles_json = serde_json::to_string_pretty(&self.profiles)
            .map_err(|e| Error::Internal(format!("profile serialization: {e}")))?;
        let ppath = self.root.join("profiles.json");
        fs::write(&ppath, profiles_json).map_err(io_err(ppath))
    }

    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let path = Self::manifest_path(&root);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 8 {
                return Err(Error::Format {
                    path: Some(path.clone()),
                    message: format!("line {}: expected 8 fields, got {}", lineno + 1, fields.len()),
                });
            }
            let parse = |what: &str, v: &str| -> Result<usize> {
                v.parse().map_err(|_| Error::Format {
                    path: Some(path.clone()),
                    message: format!("line {}: bad {what} {v:?}", lineno + 1),
                })
            };
            rows.push(ManifestRow {
                utterance_id: fields[0].to_string(),
                speaker_id: parse("speaker_id", fields[1])?,
                split: fields[2].parse()?,
                base_f0: fields[3].parse().map_err(|_| Error::Format {
                    path: Some(path.clone()),
                    message: format!("line {}: bad base_f0 {:?}", lineno + 1, fields[3]),
                })?,
                wav48: fields[4].to_string(),
                wav24: fields[5].to_string(),
                wav16: fields[6].to_string(),
                samples48: parse("samples48", fields[7])?,
            });
        }
        let ppath = root.join("profiles.json");
        let profiles = if ppath.exists() {
            let text = fs::read_to_string(&ppath).map_err(io_err(&ppath))?;
            serde_json::from_str(&text).map_err(|e| Error::Format {
                path: Some(ppath),
                message: format!("profiles.json: {e}"),
            })?
        } else {
            Vec::new()
        };
        Ok(CorpusManifest { root, rows, profiles })
    }

    pub fn split_rows(&self, split: Split) -> Vec<&ManifestRow> {
        self.rows.iter().filter(|r| r.split == split).collect()
    }

    /// Speaker ids in a split, ascending.
    pub fn split_speakers(&self, split: Split) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .rows
            .iter()
            .filter(|r| r.split == split)
            .map(|r| r.speaker_id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn profile(&self, speaker_id: usize) -> Option<&SpeakerProfile> {
        self.profiles.iter().find(|p| p.speaker_id == speaker_id)
    }
}

/// Draw profiles with rejection until every pair differs in base F0 by at
/// least 15 Hz, so speaker transfer stays measurable by pitch alone.
fn separated_profiles(num_speakers: usize, seed: u64) -> Result<Vec<SpeakerProfile>> {
    let mut profiles: Vec<SpeakerProfile> = Vec::with_capacity(num_speakers);
    for k in 0..num_speakers {
        let mut attempt = 0u64;
        loop {
            let candidate = generate_speaker(k, child_seed(seed, 1000 + k as u64 * 4096 + attempt));
            let ok = profiles.iter().all(|p| (p.base_f0 - candidate.base_f0).abs() >= 15.0);
            if ok {
                profiles.push(candidate);
                break;
            }
            attempt += 1;
            if attempt > 10_000 {
                return Err(Error::Internal(format!(
                    "could not place {num_speakers} speakers 15 Hz apart"
                )));
            }
        }
    }
    Ok(profiles)
}

/// Generate the corpus: WAVs at all three rates, scripts, profiles, and the
/// manifest with a speaker-disjoint train/val/test split.
pub fn build_corpus(
    num_speakers: usize,
    utterances_per_speaker: usize,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<CorpusManifest> {
    if num_speakers < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 speakers, got {num_speakers}"
        )));
    }
    if utterances_per_speaker < 1 {
        return Err(Error::Argument("need at least 1 utterance per speaker".into()));
    }
    let root = out_dir.as_ref().to_path_buf();
    for sub in ["wav48", "wav24", "wav16"] {
        let dir = root.join(sub);
        fs::create_dir_all(&dir).map_err(io_err(dir))?;
    }

    let profiles = separated_profiles(num_speakers, seed)?;

    // speaker-disjoint split: the last speakers become val then test; a
    // 2-speaker corpus degrades to train/val only
    let n_val = (num_speakers / 8).max(1);
    let n_test = if num_speakers >= 3 { n_val } else { 0 };
    let n_train = num_speakers - n_val - n_test;
    if n_train == 0 {
        return Err(Error::Argument(format!(
            "{num_speakers} speakers leave no training split"
        )));
    }
    let split_of = |k: usize| {
        if k < n_train {
            Split::Train
        } else if k < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        }
    };

    struct Job {
        speaker: usize,
        utterance: usize,
        script: UtteranceScript,
    }
    let jobs: Vec<Job> = (0..num_speakers)
        .flat_map(|k| {
            (0..utterances_per_speaker).map(move |j| Job {
                speaker: k,
                utterance: j,
                script: generate_script(child_seed(seed, 2_000_000 + (k * 100_000 + j) as u64)),
            })
        })
        .collect();

    let mut scripts_jsonl = String::new();
    for job in &jobs {
        let id = format!("spk{:02}_utt{:03}", job.speaker, job.utterance);
        let line = serde_json::json!({ "utterance_id": id, "tokens": job.script.tokens });
        scripts_jsonl.push_str(&line.to_string());
        scripts_jsonl.push('\n');
    }
    let spath = root.join("scripts.jsonl");
    fs::write(&spath, scripts_jsonl).map_err(io_err(spath))?;

    let rows: Result<Vec<ManifestRow>> = jobs
        .par_iter()
        .map(|job| {
            let id = format!("spk{:02}_utt{:03}", job.speaker, job.utterance);
            let synth_seed = child_seed(seed, 3_000_000 + (job.speaker * 100_000 + job.utterance) as u64);
            let audio48 = synthesize_utterance(&profiles[job.speaker], &job.script, synth_seed)?;
            let (audio24, audio16) = rate_views(&audio48)?;

            let rel48 = format!("wav48/{id}.wav");
            let rel24 = format!("wav24/{id}.wav");
            let rel16 = format!("wav16/{id}.wav");
            save_wav(&audio48, root.join(&rel48))?;
            save_wav(&audio24, root.join(&rel24))?;
            save_wav(&audio16, root.join(&rel16))?;
            Ok(ManifestRow {
                utterance_id: id,
                speaker_id: job.speaker,
                split: split_of(job.speaker),
                base_f0: profiles[job.speaker].base_f0,
                wav48: rel48,
                wav24: rel24,
                wav16: rel16,
                samples48: audio48.len(),
            })
        })
        .collect();
    let rows = rows?;

    let manifest = CorpusManifest { root, rows, profiles };
    manifest.save()?;
    Ok(manifest)
}

/// Decimate a 48 kHz master into its 24 kHz and 16 kHz views.
pub fn rate_views(
    audio48: &crate::audio::AudioSegment,
) -> Result<(crate::audio::AudioSegment, crate::audio::AudioSegment)> {
    Ok((decimate(audio48, 2)?, decimate(audio48, 3)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_corpus_has_160_rows_and_6_1_1_split() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = build_corpus(8, 20, 42, dir.path()).unwrap();
        assert_eq!(manifest.rows.len(), 160);
        assert_eq!(manifest.split_speakers(Split::Train).len(), 6);
        assert_eq!(manifest.split_speakers(Split::Val).len(), 1);
        assert_eq!(manifest.split_speakers(Split::Test).len(), 1);
    }

    #[test]
    fn splits_are_speaker_disjoint() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = build_corpus(4, 2, 7, dir.path()).unwrap();
        let train = manifest.split_speakers(Split::Train);
        for s in manifest
            .split_speakers(Split::Val)
            .iter()
            .chain(manifest.split_speakers(Split::Test).iter())
        {
            assert!(!train.contains(s));
        }
    }

    #[test]
    fn rebuild_with_same_seed_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        build_corpus(3, 2, 11, dir_a.path()).unwrap();
        build_corpus(3, 2, 11, dir_b.path()).unwrap();
        let a = fs::read(CorpusManifest::manifest_path(dir_a.path())).unwrap();
        let b = fs::read(CorpusManifest::manifest_path(dir_b.path())).unwrap();
        assert_eq!(a, b);
        // and a sample wav byte-matches too
        let wa = fs::read(dir_a.path().join("wav48/spk00_utt000.wav")).unwrap();
        let wb = fs::read(dir_b.path().join("wav48/spk00_utt000.wav")).unwrap();
        assert_eq!(wa, wb);
    }

    #[test]
    fn profiles_are_pairwise_separated() {
        let profiles = separated_profiles(8, 42).unwrap();
        for i in 0..profiles.len() {
            for j in 0..i {
                assert!((profiles[i].base_f0 - profiles[j].base_f0).abs() >= 15.0);
            }
        }
    }

    #[test]
    fn single_speaker_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            build_corpus(1, 2, 0, dir.path()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn manifest_round_trips_through_load() {
        let dir = tempfile::tempdir().unwrap();
        let built = build_corpus(3, 2, 5, dir.path()).unwrap();
        let loaded = CorpusManifest::load(dir.path()).unwrap();
        assert_eq!(built.rows, loaded.rows);
        assert_eq!(built.profiles, loaded.profiles);
    }
}
