//! Generate a synthetic clickbait world and inspect its like/click ratios.
//!
//! Builds a small world with planted clickbait items, writes the dataset
//! files a training run would consume, and prints the ratio distribution
//! that makes the clickbait problem visible in the data alone.
//!
//! Run: `cargo run --example generate_dataset`

use unbait::{generate_world, like_click_ratio, ratio_groups, WorldConfig};

fn main() -> unbait::Result<()> {
    let config = WorldConfig {
        n_users: 200,
        n_items: 500,
        interactions_per_user: 120,
        clickbait_fraction: 0.4,
        seed: 7,
        ..WorldConfig::default()
    };
    let (log, features, truth) = generate_world(&config)?;

    println!(
        "world: {} users x {} items, {} clicks ({} liked)",
        log.n_users(),
        log.n_items(),
        log.clicks().count(),
        log.clicks().filter(|it| it.liked == Some(true)).count()
    );

    // Per-item like/click ratios, split by whether the item was planted
    // as clickbait.
    let stats = like_click_ratio(&log);
    let mean_ratio = |clickbait: bool| {
        let values: Vec<f64> = stats
            .defined_ratios()
            .filter(|&(item, _)| truth.clickbait[item as usize] == clickbait)
            .map(|(_, ratio)| ratio)
            .collect();
        values.iter().sum::<f64>() / values.len() as f64
    };
    println!("mean like/click ratio, ordinary items: {:.3}", mean_ratio(false));
    println!("mean like/click ratio, clickbait items: {:.3}", mean_ratio(true));

    let histogram = ratio_groups(&stats, 10)?;
    println!("\nratio histogram (10 groups):");
    for (g, count) in histogram.buckets.iter().enumerate() {
        let bar = "#".repeat(count / 2);
        println!(
            "  [{:.1}, {:.1}{} {:>4} {}",
            g as f64 / 10.0,
            (g + 1) as f64 / 10.0,
            if g == 9 { "]" } else { ")" },
            count,
            bar
        );
    }
    println!("  never clicked: {}", histogram.undefined);

    let below: usize = histogram.buckets[..5].iter().sum();
    let defined: usize = histogram.buckets.iter().sum();
    println!(
        "\n{:.1}% of clicked items have like/click ratio below 0.5",
        100.0 * below as f64 / defined as f64
    );

    // Files as the CLI's `synth` command would write them.
    let dir = std::env::temp_dir().join("unbait-example-dataset");
    std::fs::create_dir_all(&dir).expect("create temp dir");
    log.write_csv(&dir.join("interactions.csv"))?;
    features.write_csv(&dir.join("features.csv"), log.items())?;
    truth.save(&dir.join("ground_truth.json"))?;
    println!("dataset written to {}", dir.display());
    Ok(())
}
