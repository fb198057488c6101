#![no_main]
use libfuzzer_sys::fuzz_target;

use cast::learner::{load_model, save_model};
use cast::LabelSpace;

fuzz_target!(|data: &str| {
    let ls = LabelSpace::new(vec!["a".into(), "b".into()], 1).unwrap();
    if let Ok(model) = load_model(data, &ls) {
        let text = save_model(&model).expect("loaded model serialises");
        assert_eq!(load_model(&text, &ls).expect("saved model loads"), model);
    }
});
