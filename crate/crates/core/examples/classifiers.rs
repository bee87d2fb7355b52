//! Five-fold cross-validation of every classifier on the night's features,
//! then a small random search over KNN.

use sleeplite::config::Config;
use sleeplite::ml::{cross_validate, tune_hyperparameters, Algo, ClassifierSpec, SearchSpace};
use sleeplite::pipeline::build_feature_table;
use sleeplite::synth::{random_hypnogram, synth_recording, SynthConfig};
use sleeplite::windowing::SplitTag;

fn main() -> sleeplite::Result<()> {
    let rec = synth_recording(
        "night",
        &random_hypnogram(90, 4),
        &SynthConfig {
            seed: 4,
            ..SynthConfig::default()
        },
    )?;
    let data = build_feature_table(&[rec], &Config::default())?;
    let names = &data.table.names;
    let (x, y) = data.table.subset(SplitTag::Train);
    println!("{} training rows", x.len());

    for algo in [
        Algo::Knn,
        Algo::DecisionTree,
        Algo::RandomForest,
        Algo::Gbdt,
    ] {
        let cv = cross_validate(&ClassifierSpec::new(algo, 0), names, &x, &y, 5, 0)?;
        println!(
            "{algo:<5} accuracy {:.3} ± {:.3}, macro F1 {:.3}",
            cv.mean_accuracy, cv.std_accuracy, cv.mean_macro_f1
        );
    }

    let space = SearchSpace::default_for(Algo::Knn);
    let tuned = tune_hyperparameters(
        &space,
        &ClassifierSpec::new(Algo::Knn, 0),
        names,
        &x,
        &y,
        10,
        5,
        0,
    )?;
    let best = &tuned.trace[tuned.best_trial];
    println!(
        "best KNN trial {}: {:?}, macro F1 {:.3}",
        best.trial, best.params, best.mean_macro_f1
    );
    Ok(())
}
