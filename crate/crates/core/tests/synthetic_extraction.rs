use killmatrix_core::corpus::synth::{generate_synthetic_corpus, SynthConfig};
use killmatrix_core::corpus::{Corpus, SOURCE_DIR};
use killmatrix_core::extractor::{extract_rows, read_features, write_features, Project};

#[test]
fn synthetic_corpus_extracts_and_round_trips() {
    let synth = generate_synthetic_corpus(&SynthConfig {
        mutants: 400,
        seed: 3,
        ..SynthConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    synth.write_dir(dir.path()).unwrap();

    let corpus = Corpus::load_dir(dir.path()).unwrap();
    assert_eq!(corpus.mutants, synth.corpus.mutants);
    assert_eq!(corpus.kills, synth.corpus.kills);

    let project = Project::load_dir(&dir.path().join(SOURCE_DIR)).unwrap();
    let rows = extract_rows(&project, &corpus).unwrap();
    assert_eq!(rows.len(), corpus.coverage.len());
    for r in &rows {
        let f = &r.features;
        if f.parent_context_type == "Block" {
            assert_eq!((f.lines_in_method, f.source_complexity, f.call, f.callby), (0, 0, 0, 0));
        } else {
            assert!(f.lines_in_method > 0 && f.source_complexity >= 1);
        }
        if !matches!(f.statement_type.as_str(), "IF" | "WHILE" | "FOR" | "SWITCH" | "RETURN") {
            assert_eq!(f.skeleton_modification, "[]");
        }
    }

    let path = dir.path().join("features.csv");
    write_features(&path, &rows).unwrap();
    assert_eq!(read_features(&path).unwrap(), rows);
}
