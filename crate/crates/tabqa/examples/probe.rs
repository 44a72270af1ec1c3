use tabqa::datagen::{generate_dataset, GenConfig, Schema};
use tabqa::distributed::{train_end_to_end, DistributedConfig, DistributedModel, TrainOptions};

fn main() {
    let config = GenConfig { train: 50, valid: 0, test: 0, ..GenConfig::default() };
    let samples = generate_dataset(&config, &Schema::default()).unwrap().train;
    for batch in [4usize, 16] {
        let mut model = DistributedModel::new(&samples, DistributedConfig::tiny(), 3);
        let opts = TrainOptions {
            epochs: 200,
            batch_size: batch,
            seed: 3,
            progress: false,
            ..TrainOptions::default()
        };
        let report = train_end_to_end(&mut model, &samples, &samples, None, &opts).unwrap();
        for m in report.epochs.iter().step_by(25) {
            println!("batch {batch} epoch {} loss {:.4} acc {:.3}", m.epoch, m.train_loss, m.valid_denotation_acc);
        }
        println!("batch {batch} best {:.3} at {}", report.best_valid_acc, report.best_epoch);
    }
}
