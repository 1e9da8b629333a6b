mod common;

use common::{fuzz_text, valid_token};
use genflow_core::ingest::{preprocess_text, Preprocessor};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

#[test]
fn worked_examples_with_shipped_stopwords() {
    assert_eq!(preprocess_text("").joined(), "");
    assert_eq!(
        preprocess_text("Amazing SDXL workflow!!! Visit https://x.co #sdxl @bob 😀").joined(),
        "amazing sdxl workflow visit"
    );
    assert_eq!(preprocess_text("<b>Img2Img</b> the best of the art").joined(), "img2img best art");
}

#[test]
fn fuzzed_idempotence_and_alphabet() {
    let pre = Preprocessor::default();
    let mut rng = StdRng::seed_from_u64(2024);
    for i in 0..10_000 {
        let raw = fuzz_text(&mut rng);
        let once = pre.clean(&raw);
        let twice = pre.clean(&once.joined());
        assert_eq!(once, twice, "input #{i}: {raw:?}");
        for t in once.tokens() {
            assert!(valid_token(t), "input #{i}: token {t:?} from {raw:?}");
            assert!(!pre.is_stopword(t), "input #{i}: stopword {t:?} survived");
        }
    }
}

#[test]
fn custom_stopword_list() {
    let pre = Preprocessor::from_stopword_list("# comment\nworkflow\n\nSDXL\n");
    assert_eq!(pre.clean("The SDXL workflow").joined(), "the");
}

proptest! {
    #[test]
    fn arbitrary_strings(raw in "\\PC{0,64}") {
        let once = preprocess_text(&raw);
        prop_assert_eq!(&preprocess_text(&once.joined()), &once);
        prop_assert!(once.tokens().iter().all(|t| valid_token(t)));
    }
}
