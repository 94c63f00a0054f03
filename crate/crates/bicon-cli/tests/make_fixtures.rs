//! Regenerates the committed fixtures. Run manually after intentional
//! format or pipeline changes:
//!
//! ```text
//! cargo test -p bicon-cli --test make_fixtures -- --ignored
//! ```

use std::fs;
use std::path::Path;

use bicon::config::TrainConfig;
use bicon::dataset::generate_dataset;
use bicon::io::checkpoint::save_checkpoint;
use bicon::io::pgm::mask_bytes;
use bicon::pipeline::{train_epochs, TrainState};
use bicon::Mask;

#[test]
#[ignore]
fn regenerate_fixtures() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    fs::create_dir_all(&dir).unwrap();

    // 4x4 mask with a 2x2 salient block.
    let mut block = Mask::zeros(4, 4).unwrap();
    for y in 1..3 {
        for x in 1..3 {
            block.set(y, x, 1);
        }
    }
    fs::write(dir.join("block.pgm"), mask_bytes(&block)).unwrap();

    // All-salient 4x4 mask.
    let ones = Mask::new(4, 4, vec![1; 16]).unwrap();
    fs::write(dir.join("ones.pgm"), mask_bytes(&ones)).unwrap();

    // A generated shape mask.
    let (samples, _) = generate_dataset::<f64>(21, 16, 1, 1);
    fs::write(dir.join("shapes.pgm"), mask_bytes(&samples[0].mask)).unwrap();

    // Tiny training config and its checkpoint.
    let cfg_text = "\
# fixture training run
epochs=2
batch_size=4
seed=9
n_train=8
n_test=4
image_size=16
";
    fs::write(dir.join("tiny.cfg"), cfg_text).unwrap();
    let cfg = TrainConfig::parse(cfg_text).unwrap();
    let mut state = TrainState::<f64>::fresh(&cfg);
    train_epochs(&cfg, &mut state, |_, _| ()).unwrap();
    fs::write(dir.join("tiny.ckpt"), save_checkpoint(&cfg, &state)).unwrap();
}
