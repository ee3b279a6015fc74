use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use supertoken::entropy::{assign_roles, entropy_report, Role};
use supertoken::pipeline::{StepStatus, MANIFEST_FILE};
use supertoken::render::DEFAULT_WINDOW;
use supertoken::taxonomy::Assignment;
use supertoken::*;

const PHRASES: &[&[&str]] = &[
    &["Wait", ",", " hold", " on", "."],
    &["Let", "'s", " check", " the", " sum", "."],
    &[",", " so", " x", " is", " 4", "."],
    &["But", " maybe", " the", " problem", " says", " n", "."],
    &[" The", " area", " is", " 1", "2", "."],
    &["\n"],
];

fn corpus(n: usize, seed: u64) -> Vec<Trace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = rng.gen_range(4..12);
            let pieces: Vec<&str> = (0..k)
                .flat_map(|_| PHRASES[rng.gen_range(0..PHRASES.len())].iter().copied())
                .collect();
            let h = (0..pieces.len()).map(|_| rng.gen_range(0.0..3.0)).collect();
            Trace::from_pieces(format!("c{i}"), &pieces)
                .with_entropy(h)
                .with_correct(i % 3 != 0)
        })
        .collect()
}

fn strip_html(doc: &str) -> String {
    let mut out = String::new();
    let mut in_tag = false;
    for c in doc.chars() {
        match c {
            '<' => in_tag = true,
            '>' => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&amp;", "&")
}

#[test]
fn library_flow_end_to_end() {
    let traces = corpus(60, 1);
    let table = train(&traces, &TrainConfig::default()).unwrap();
    assert!(table.merges.iter().any(|m| m.surface == "Wait, hold on."));
    let segs = Supertokenizer::new(&table).unwrap().apply_corpus(&traces).unwrap();
    for (t, s) in traces.iter().zip(&segs) {
        assert_eq!(decode(s, &table).unwrap(), t.text);
    }
    let cmap = classify_table(&table);
    assert_eq!(cmap.len(), table.len());

    let rep = entropy_report::<f64>(&traces, &segs, 17.2).unwrap();
    let parts = rep.ceiling.delta_by_role.unwrap();
    assert!((parts.first + parts.continuation - rep.ceiling.delta).abs() < 1e-12);
    let n: usize = Role::ALL.iter().map(|r| rep.stats.role(*r).count).sum();
    assert_eq!(n, traces.iter().map(Trace::len).sum::<usize>());
}

#[test]
fn f32_and_f64_agree() {
    let traces = corpus(30, 2);
    let table = train(&traces, &TrainConfig::default()).unwrap();
    let segs = Supertokenizer::new(&table).unwrap().apply_corpus(&traces).unwrap();
    let a = entropy_report::<f64>(&traces, &segs, 17.2).unwrap();
    let b = entropy_report::<f32>(&traces, &segs, 17.2).unwrap();
    assert!((a.ceiling.delta - b.ceiling.delta as f64).abs() < 1e-5);
    let ci64 = paired_token_ci(14082.0f64, 13160.0, 30).unwrap();
    let ci32 = paired_token_ci(14082.0f32, 13160.0, 30).unwrap();
    assert!((ci64.lo - ci32.lo as f64).abs() < 1e-2);
}

fn ten_token_fixture() -> (Trace, Segmentation, CategoryMap) {
    let pieces = ["a", " b", " c", "Wait", ",", " d", " e", " f", " g", " h", " i"];
    let trace = Trace::from_pieces("ten", &pieces);
    // output tokens: a, b, c, [Wait ,], d..i -> 10 tokens, merged at output index 3
    let mut ids: Vec<u32> = (0..3).collect();
    ids.push(20);
    ids.extend(3..9);
    let mut spans: Vec<(usize, usize)> = (0..3).map(|i| (i, i + 1)).collect();
    spans.push((3, 5));
    spans.extend((5..11).map(|i| (i, i + 1)));
    let seg = Segmentation {
        trace_id: "ten".into(),
        token_ids: ids,
        spans,
    };
    let mut cmap = CategoryMap {
        base_vocab_size: 20,
        assignments: BTreeMap::new(),
        unclassified: vec![],
    };
    cmap.assignments.insert(
        20,
        Assignment {
            category: Category::Backtracking,
            rule: "starts with \"Wait\"".into(),
        },
    );
    (trace, seg, cmap)
}

#[test]
fn ribbon_colors_merged_cells() {
    let (trace, seg, cmap) = ten_token_fixture();
    let plan = RenderPlan {
        trace_id: "ten".into(),
        windows: vec![(0, 10), (2, 5)],
        format: RenderFormat::Html,
    };
    let doc = String::from_utf8(render_trace(&trace, &seg, &cmap, &plan).unwrap()).unwrap();
    let ribbon = doc.split("<div class=\"ribbon\">").nth(1).unwrap().split("</div>").next().unwrap();
    let cells: Vec<&str> = ribbon.split("</span>").filter(|c| !c.is_empty()).collect();
    assert_eq!(cells.len(), 10);
    for (i, c) in cells.iter().enumerate() {
        let want = if i == 3 { "k-Backtracking" } else { "k-none" };
        assert!(c.contains(want), "cell {i}: {c}");
    }
    assert!(doc.contains(".k-Backtracking{background:#e74c3c}"));

    // window text equals the exact surface
    let win = doc.split("<pre class=\"win\">").nth(1).unwrap().split("</pre>").next().unwrap();
    assert_eq!(strip_html(win), trace.text);
    let again = render_trace(&trace, &seg, &cmap, &plan).unwrap();
    assert_eq!(doc.as_bytes(), again.as_slice());
}

#[test]
fn no_supertokens_all_neutral() {
    let trace = Trace::from_pieces("n", &["x", " y", " <z>"]);
    let seg = apply(&["x", " y", " <z>"], &MergeTable::empty(vec![" <z>".into(), " y".into(), "x".into()], 3, 0)).unwrap();
    let seg = Segmentation {
        trace_id: "n".into(),
        ..seg
    };
    let cmap = classify_table(&MergeTable::empty(vec![], 3, 0));
    let plan = RenderPlan {
        trace_id: "n".into(),
        windows: vec![(0, 3)],
        format: RenderFormat::Html,
    };
    let doc = String::from_utf8(render_trace(&trace, &seg, &cmap, &plan).unwrap()).unwrap();
    assert!(!doc.contains("<span class=\"k-Backtracking\"></span>"));
    assert!(doc.contains("&lt;z&gt;"));
    let win = doc.split("<pre class=\"win\">").nth(1).unwrap().split("</pre>").next().unwrap();
    assert_eq!(strip_html(win), "x y <z>");
}

#[test]
fn unmapped_supertoken_in_render() {
    let (trace, seg, mut cmap) = ten_token_fixture();
    cmap.assignments.clear();
    let plan = RenderPlan {
        trace_id: "ten".into(),
        windows: vec![],
        format: RenderFormat::Ansi,
    };
    assert!(matches!(
        render_trace(&trace, &seg, &cmap, &plan),
        Err(Error::UnmappedSupertoken(20))
    ));
}

#[test]
fn pipeline_reproducible_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&path, &corpus(50, 3)).unwrap();
    let mut a = PipelineConfig::new(&path, dir.path().join("a"));
    a.budget = 40;
    let mut b = a.clone();
    b.out_dir = dir.path().join("b");
    let ma = run_pipeline(&a).unwrap();
    let mb = run_pipeline(&b).unwrap();
    assert_eq!(ma, mb);
    for name in ["merges.json", "seg.jsonl", "categories.json", "entropy.json", "labels.json", "transitions.json"] {
        let rec = ma.file(name).unwrap_or_else(|| panic!("{name} missing"));
        let bytes = std::fs::read(a.out_dir.join(name)).unwrap();
        assert_eq!(rec.sha256, supertoken::pipeline::sha256_hex(&bytes));
    }
    assert!(ma.files.iter().filter(|f| f.path.starts_with("render/")).count() == 3);
    assert!(ma.steps.iter().all(|s| s.status == StepStatus::Done));
    assert_eq!(
        std::fs::read(a.out_dir.join(MANIFEST_FILE)).unwrap(),
        std::fs::read(b.out_dir.join(MANIFEST_FILE)).unwrap()
    );
}

#[test]
fn auto_windows_on_trained_corpus() {
    let traces = corpus(20, 4);
    let table = train(&traces, &TrainConfig::default()).unwrap();
    let segs = Supertokenizer::new(&table).unwrap().apply_corpus(&traces).unwrap();
    let cmap = classify_table(&table);
    for s in &segs {
        let w = auto_windows(s, &cmap, 3, DEFAULT_WINDOW);
        assert!(w.len() <= 3);
        for pair in w.windows(2) {
            assert!(pair[0].1 <= pair[1].0);
        }
        for &(a, b) in &w {
            assert!(a < b && b <= s.len());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roles_cover_every_base_token(seed in any::<u64>()) {
        let traces = corpus(8, seed);
        let table = train(&traces, &TrainConfig { budget: 20, ..TrainConfig::default() }).unwrap();
        for t in &traces {
            let seg = Supertokenizer::new(&table).unwrap().apply_trace(t).unwrap();
            let roles = assign_roles(&seg);
            prop_assert_eq!(roles.len(), t.len());
            let merged = roles.iter().filter(|r| r.role != Role::NonMerged).count();
            let spanned: usize = seg.spans.iter().map(|(s, e)| e - s).filter(|&l| l > 1).sum();
            prop_assert_eq!(merged, spanned);
        }
    }

    #[test]
    fn transition_metrics_ignore_trace_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seqs: Vec<LabeledSequence> = (0..20)
            .map(|i| LabeledSequence {
                trace_id: format!("s{i}"),
                events: (0..rng.gen_range(2..15)).map(|_| Category::ALL[rng.gen_range(0..9)]).collect(),
                correct: Some(rng.gen_bool(0.5)),
            })
            .collect();
        let a: TransitionMatrix<f64> = transition_matrix(&seqs, diagnostics::Group::All, Pooling::Pooled).unwrap();
        seqs.reverse();
        let b: TransitionMatrix<f64> = transition_matrix(&seqs, diagnostics::Group::All, Pooling::Pooled).unwrap();
        prop_assert_eq!(a.counts, b.counts);
        prop_assert_eq!(composite_metrics(&a), composite_metrics(&b));
    }
}
