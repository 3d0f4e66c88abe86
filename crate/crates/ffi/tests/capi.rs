use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use txnfm::encoder::{cls_embedding, init_params, save_encoder, ModelConfig, Params};
use txnfm::grammar::{serialize_document, BucketConfig};
use txnfm::synthgen::{generate_corpus, GeneratorConfig, LengthDistribution};
use txnfm::tokenizer::{encode, train_vocab, TokenizerConfig, Vocabulary, CLS_ID, PAD_ID};
use txnfm_ffi::*;

struct Fixture {
    _dir: tempfile::TempDir,
    vocab_path: CString,
    encoder_path: CString,
    docs: Vec<String>,
    vocab: Vocabulary,
    params: Params<f32>,
}

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&GeneratorConfig {
        n_accounts: 40,
        length_distribution: LengthDistribution { log_mean: 2.5, log_std: 0.3, max_len: 30 },
        ..GeneratorConfig::default()
    })
    .unwrap();
    let buckets = BucketConfig::default();
    let docs: Vec<String> = corpus
        .accounts
        .iter()
        .map(|a| serialize_document(&a.account_id, &a.transactions, &buckets).unwrap().render())
        .collect();
    let vocab = train_vocab(&docs, buckets, &TokenizerConfig { target_size: 400, min_frequency: 1 }).unwrap();
    let vocab_path = dir.path().join("vocab.txt");
    vocab.save(&vocab_path, None).unwrap();
    let cfg = ModelConfig { vocab_size: vocab.len(), max_context: 32, d_model: 16, n_heads: 2, n_layers: 1, d_ff: 32, ..ModelConfig::default() };
    let params = init_params::<f32>(&cfg, 9);
    let encoder_path = dir.path().join("enc.ckpt");
    save_encoder(&encoder_path, &params, None, 0, 9, vec![], None, serde_json::Value::Null).unwrap();
    Fixture {
        vocab_path: cpath(&vocab_path),
        encoder_path: cpath(&encoder_path),
        _dir: dir,
        docs,
        vocab,
        params,
    }
}

unsafe fn take_string(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    txnfm_string_free(p);
    s
}

unsafe fn last_error() -> String {
    take_string(txnfm_last_error_message())
}

unsafe fn load_vocab(f: &Fixture) -> *mut TxnfmVocab {
    let mut v = ptr::null_mut();
    assert_eq!(txnfm_vocab_load(f.vocab_path.as_ptr(), &mut v), TxnfmStatus::Ok);
    v
}

#[test]
fn serialize_validate_round_trip() {
    let f = fixture();
    unsafe {
        let v = load_vocab(&f);
        assert_eq!(txnfm_vocab_len(v), f.vocab.len());
        let desc = CString::new("  NETFLIX.COM   [SEP] bill ").unwrap();
        let mut out = ptr::null_mut();
        let st = txnfm_serialize_transaction(v, TxnfmDirection::Debit, 1299, desc.as_ptr(), &mut out);
        assert_eq!(st, TxnfmStatus::Ok);
        assert!(txnfm_last_error_message().is_null());
        let sentence = take_string(out);
        assert_eq!(sentence, "[TYPE] DEBIT [AMT] AMT_0_50 [NAME] netflix.com bill");
        let c = CString::new(sentence).unwrap();
        assert_eq!(txnfm_validate_sentence(v, c.as_ptr()), TxnfmStatus::Ok);
        let bad = CString::new("[TYPE] SIDEWAYS [AMT] AMT_0_50 [NAME] x").unwrap();
        assert_eq!(txnfm_validate_sentence(v, bad.as_ptr()), TxnfmStatus::MalformedSentence);
        assert!(last_error().contains("SIDEWAYS"));
        txnfm_vocab_free(v);
    }
}

#[test]
fn encode_matches_the_library_and_decodes_back() {
    let f = fixture();
    unsafe {
        let v = load_vocab(&f);
        for doc in f.docs.iter().take(10) {
            let text = CString::new(doc.as_str()).unwrap();
            let ctx = doc.len() + 1;
            let mut ids = vec![u32::MAX; ctx];
            let mut n_real = 0usize;
            let st = txnfm_encode(v, text.as_ptr(), ctx, ids.as_mut_ptr(), ids.len(), &mut n_real);
            assert_eq!(st, TxnfmStatus::Ok);
            let expected = encode(doc, &f.vocab, ctx);
            assert_eq!(ids, expected.ids);
            assert_eq!(n_real, expected.n_real());
            assert_eq!(ids[0], CLS_ID);
            assert!(ids[n_real..].iter().all(|&i| i == PAD_ID));
            let mut out = ptr::null_mut();
            assert_eq!(txnfm_decode(v, ids.as_ptr(), ids.len(), &mut out), TxnfmStatus::Ok);
            assert_eq!(take_string(out), *doc);
        }
        txnfm_vocab_free(v);
    }
}

#[test]
fn embedding_matches_the_library() {
    let f = fixture();
    unsafe {
        let mut e = ptr::null_mut();
        assert_eq!(txnfm_encoder_load(f.encoder_path.as_ptr(), f.vocab_path.as_ptr(), &mut e), TxnfmStatus::Ok);
        assert_eq!(txnfm_encoder_dim(e), 16);
        assert_eq!(txnfm_encoder_max_context(e), 32);
        let doc = &f.docs[0];
        let text = CString::new(doc.as_str()).unwrap();
        let mut out = vec![0f32; 16];
        assert_eq!(txnfm_embed_document(e, text.as_ptr(), out.as_mut_ptr(), out.len()), TxnfmStatus::Ok);
        let expected = cls_embedding(&f.params, &encode(doc, &f.vocab, 32)).unwrap();
        assert_eq!(out, expected);
        let mut short = vec![0f32; 4];
        assert_eq!(txnfm_embed_document(e, text.as_ptr(), short.as_mut_ptr(), 4), TxnfmStatus::BufferTooSmall);
        txnfm_encoder_free(e);
    }
}

#[test]
fn errors_are_reported_not_raised() {
    let f = fixture();
    unsafe {
        let mut v = ptr::null_mut();
        let missing = CString::new("/nonexistent/vocab.txt").unwrap();
        assert_eq!(txnfm_vocab_load(missing.as_ptr(), &mut v), TxnfmStatus::Io);
        assert!(v.is_null());
        assert!(last_error().contains("/nonexistent/vocab.txt"));

        assert_eq!(txnfm_vocab_load(ptr::null(), &mut v), TxnfmStatus::NullPointer);
        let not_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(txnfm_vocab_load(not_utf8.as_ptr().cast(), &mut v), TxnfmStatus::InvalidUtf8);

        // A vocabulary file is not an encoder checkpoint.
        let mut e = ptr::null_mut();
        let st = txnfm_encoder_load(f.vocab_path.as_ptr(), f.vocab_path.as_ptr(), &mut e);
        assert_eq!(st, TxnfmStatus::CorruptFile);

        let v = load_vocab(&f);
        let mut out = ptr::null_mut();
        assert_eq!(txnfm_decode(v, [1_000_000u32].as_ptr(), 1, &mut out), TxnfmStatus::UnknownTokenId);
        let text = CString::new("[TYPE] DEBIT").unwrap();
        let mut ids = [0u32; 4];
        let st = txnfm_encode(v, text.as_ptr(), 8, ids.as_mut_ptr(), ids.len(), ptr::null_mut());
        assert_eq!(st, TxnfmStatus::BufferTooSmall);
        assert_eq!(txnfm_encode(ptr::null(), text.as_ptr(), 4, ids.as_mut_ptr(), 4, ptr::null_mut()), TxnfmStatus::NullPointer);
        txnfm_vocab_free(v);

        txnfm_vocab_free(ptr::null_mut());
        txnfm_encoder_free(ptr::null_mut());
        txnfm_string_free(ptr::null_mut());
        assert_eq!(txnfm_vocab_len(ptr::null()), 0);
        let name = CStr::from_ptr(txnfm_status_name(TxnfmStatus::MissingPrerequisite));
        assert_eq!(name.to_str().unwrap(), "missing_prerequisite");
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/txnfm.h")
}

#[test]
fn header_declares_every_export_and_compiles_as_c() {
    let text = std::fs::read_to_string(header()).unwrap();
    for f in [
        "txnfm_status_name",
        "txnfm_last_error_message",
        "txnfm_string_free",
        "txnfm_vocab_load",
        "txnfm_vocab_free",
        "txnfm_vocab_len",
        "txnfm_serialize_transaction",
        "txnfm_validate_sentence",
        "txnfm_encode",
        "txnfm_decode",
        "txnfm_encoder_load",
        "txnfm_encoder_free",
        "txnfm_encoder_dim",
        "txnfm_encoder_max_context",
        "txnfm_embed_document",
    ] {
        assert!(text.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(text.contains("TXNFM_STATUS_OK = 0"));

    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping compile check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"txnfm.h\"\n\
         int main(void) {\n\
           TxnfmVocab *v = 0;\n\
           TxnfmStatus s = txnfm_vocab_load(\"vocab.txt\", &v);\n\
           size_t n = txnfm_vocab_len(v);\n\
           return (int)s + (int)n;\n\
         }\n",
    )
    .unwrap();
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header().parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
