// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hand-built lesion-classification workbench shared by the integration
//! tests. Sample `img-0` carries a strong "text marking" component that
//! drags it toward the wrong class; `tests/oracle/walkthrough_golden.py`
//! mirrors these numbers exactly.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use steerlab::concepts;
use steerlab::engine::{ClassSet, ScoreMode};
use steerlab::ingest::{self, EmbeddingCorpus, Vocabulary};
use steerlab::sae::{self, SaeModel};
use steerlab::service::{Service, Workbench, WorkbenchConfig};

pub const DIM: usize = 4;
pub const TEXT_COMPONENT: usize = 2;
pub const DEAD_COMPONENT: usize = 4;
pub const K: usize = 3;

pub fn model() -> SaeModel {
    #[rustfmt::skip]
    let enc = vec![
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 0.0, 0.0,
    ];
    #[rustfmt::skip]
    let dec = vec![
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.6, 0.8, 0.0, 0.0,
    ];
    SaeModel::new(
        DIM,
        5,
        enc,
        vec![0.0, 0.0, 0.0, 0.0, -0.1],
        dec,
        vec![0.0, 0.1, 0.0, 0.0],
    )
    .unwrap()
}

pub fn classes() -> ClassSet {
    ClassSet::new(
        "lesion",
        vec![
            ("melanoma".into(), vec![1.0, 0.2, 0.0, 0.1]),
            ("nevus".into(), vec![0.0, 0.2, 1.0, 0.1]),
        ],
    )
    .unwrap()
}

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}-{i}")).collect()
}

pub fn inspection() -> EmbeddingCorpus {
    let rows = [
        vec![0.6, 0.5, 0.9, 0.1],
        vec![0.9, 0.3, 0.1, 0.0],
        vec![0.1, 0.4, 0.8, 0.2],
        vec![-0.2, 0.3, 0.7, 0.5],
    ];
    EmbeddingCorpus::from_rows(
        ids("img", 4),
        &rows,
        Some(vec![
            "melanoma".into(),
            "melanoma".into(),
            "nevus".into(),
            "nevus".into(),
        ]),
        Some((0..4).map(|i| format!("inspect/img-{i}.png")).collect()),
    )
    .unwrap()
}

pub fn reference() -> EmbeddingCorpus {
    let rows = [
        vec![0.9, 0.1, 0.0, 0.0],
        vec![0.8, 0.2, 0.1, 0.0],
        vec![0.1, 0.9, 0.0, 0.1],
        vec![0.0, 0.7, 0.1, 0.0],
        vec![0.0, 0.1, 0.95, 0.0],
        vec![0.1, 0.0, 0.85, 0.1],
        vec![0.0, 0.0, 0.1, 0.9],
        vec![0.2, 0.1, 0.0, 0.6],
    ];
    EmbeddingCorpus::from_rows(
        ids("ref", 8),
        &rows,
        None,
        Some((0..8).map(|i| format!("ref/ref-{i}.png")).collect()),
    )
    .unwrap()
}

pub fn vocabulary() -> Vocabulary {
    Vocabulary::new(vec![
        ("".into(), vec![0.5, 0.5, 0.5, 0.5]),
        ("irregular pigment".into(), vec![1.0, 0.0, 0.0, 0.0]),
        ("skin tone".into(), vec![0.0, 1.0, 0.0, 0.0]),
        ("text marking".into(), vec![0.0, 0.0, 1.0, 0.0]),
        ("ruler".into(), vec![0.0, 0.0, 0.0, 1.0]),
    ])
    .unwrap()
}

pub fn eval_set() -> EmbeddingCorpus {
    let rows = [
        vec![0.7, 0.2, 0.1, 0.0],
        vec![0.6, 0.3, 0.8, 0.0],
        vec![0.8, 0.1, 0.0, 0.2],
        vec![0.5, 0.4, 0.6, 0.1],
        vec![0.9, 0.2, 0.3, 0.1],
        vec![0.1, 0.3, 0.9, 0.1],
        vec![0.0, 0.2, 0.7, 0.3],
        vec![0.2, 0.1, 0.6, 0.0],
        vec![0.3, 0.2, 0.5, 0.2],
        vec![0.1, 0.5, 0.4, 0.0],
    ];
    let labels = (0..10)
        .map(|i| if i < 5 { "melanoma" } else { "nevus" }.to_owned())
        .collect();
    EmbeddingCorpus::from_rows(ids("val", 10), &rows, Some(labels), None).unwrap()
}

/// Writes every artifact plus a config file into `dir`; returns the config
/// path.
pub fn write_workbench(dir: &Path) -> PathBuf {
    sae::write_sae(&model(), dir.join("model.sae")).unwrap();
    ingest::write_corpus(&inspection(), dir.join("inspect.emb")).unwrap();
    ingest::write_corpus(&reference(), dir.join("reference.emb")).unwrap();
    ingest::write_vocabulary(&vocabulary(), dir.join("vocab.emb")).unwrap();
    steerlab::engine::write_class_set(&classes(), dir.join("lesion.emb")).unwrap();
    ingest::write_corpus(&eval_set(), dir.join("val.emb")).unwrap();
    for sub in ["inspect", "ref"] {
        std::fs::create_dir_all(dir.join("assets").join(sub)).unwrap();
    }
    for i in 0..4 {
        std::fs::write(
            dir.join(format!("assets/inspect/img-{i}.png")),
            format!("png-img-{i}"),
        )
        .unwrap();
    }
    for i in 0..8 {
        std::fs::write(
            dir.join(format!("assets/ref/ref-{i}.png")),
            format!("png-ref-{i}"),
        )
        .unwrap();
    }
    let cfg = WorkbenchConfig {
        sae: "model.sae".into(),
        inspection_corpus: "inspect.emb".into(),
        reference_corpus: "reference.emb".into(),
        vocabulary: "vocab.emb".into(),
        class_sets: BTreeMap::from([("lesion".to_owned(), "lesion.emb".into())]),
        eval_sets: BTreeMap::from([("val".to_owned(), "val.emb".into())]),
        asset_dir: "assets".into(),
        logit_scale: 100.0,
        score_mode: ScoreMode::Cosine,
        k: K,
        cards: Some("cards.crd".into()),
        history_dir: Some("history".into()),
    };
    let path = dir.join("workbench.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    path
}

pub fn service(dir: &Path) -> Arc<Service> {
    let cfg = WorkbenchConfig::read(write_workbench(dir)).unwrap();
    Arc::new(Service::new(Workbench::load(&cfg).unwrap()))
}

pub fn cards() -> Vec<concepts::ConceptCard> {
    concepts::build_all_cards(&model(), &reference(), &vocabulary(), K).unwrap()
}
