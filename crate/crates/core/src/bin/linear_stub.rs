//! Reference model process for the NDJSON protocol. Scores with the builtin
//! linear model, or misbehaves on request for transport tests.

use std::io::{self, BufRead, BufWriter, Write};

use anyhow::{bail, Context, Result};
use clap::Parser;
use respverify::model_io::{LinearModel, Link, Prediction, PROTOCOL_VERSION};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(about = "Linear model speaking the respverify subprocess protocol")]
struct Args {
    /// Comma-separated coefficients.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    weights: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    intercept: f64,
    #[arg(long, default_value = "identity")]
    link: String,
    #[arg(long)]
    threshold: Option<f64>,
    /// Answer every request with this label.
    #[arg(long)]
    constant: Option<String>,
    /// Reply in reverse order within each block of this many requests.
    #[arg(long)]
    shuffle: Option<usize>,
    /// Exit with an error after answering this many requests.
    #[arg(long)]
    fail_after: Option<usize>,
    /// Emit a malformed line instead of the first reply.
    #[arg(long)]
    garbage: bool,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let link = match args.link.as_str() {
        "identity" => Link::Identity,
        "logistic" => Link::Logistic,
        other => bail!("unknown link {other}"),
    };
    let mut model = LinearModel::new(args.weights.clone(), args.intercept, link);
    if let Some(t) = args.threshold {
        model = model.with_threshold(t);
    }

    let stdin = io::stdin().lock();
    let mut out = BufWriter::new(io::stdout().lock());
    let mut lines = stdin.lines();
    let hello: Value = serde_json::from_str(&lines.next().context("no handshake")??)?;
    if hello["protocol"] != json!(PROTOCOL_VERSION) {
        bail!("unsupported handshake {hello}");
    }
    writeln!(out, "{}", json!({ "protocol": PROTOCOL_VERSION }))?;
    out.flush()?;

    let mut pending = Vec::new();
    let mut answered = 0usize;
    for line in lines {
        let req: Value = serde_json::from_str(&line?)?;
        let id = req["id"].as_u64().context("request without id")?;
        let x: Vec<f64> = serde_json::from_value(req["x"].clone())?;
        if args.fail_after == Some(answered) {
            eprintln!("linear-stub: giving up after {answered} requests");
            std::process::exit(4);
        }
        let y = match &args.constant {
            Some(label) => json!(label),
            None => match model.predict(&x) {
                Prediction::Score(s) => json!(s),
                Prediction::Label(l) => json!(l),
            },
        };
        answered += 1;
        if args.garbage {
            writeln!(out, "{{\"id\": {id}, \"y\"")?;
            out.flush()?;
            continue;
        }
        pending.push(json!({ "id": id, "y": y }));
        let block = args.shuffle.unwrap_or(1).max(1);
        if pending.len() >= block {
            for r in pending.drain(..).rev() {
                writeln!(out, "{r}")?;
            }
            out.flush()?;
        }
    }
    for r in pending.drain(..).rev() {
        writeln!(out, "{r}")?;
    }
    out.flush()?;
    Ok(())
}
