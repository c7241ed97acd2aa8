use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use gpm_cli::args::{Cli, Command, GenerateArgs, OracleAlgorithm, OracleArgs, RunArgs};
use gpm_cli::{
    checksum_coefficients, emit_metrics, exit_code, hex, load_graph, run_benchmark, write_summary, write_values,
    VertexValues,
};
use gpm_core::algorithms::oracle::{oracle_components, oracle_pagerank, oracle_triangles};
use gpm_core::algorithms::{checksum_f64, checksum_labels};
use gpm_core::graph::{dorogovtsev_mendes, load_edge_list, write_edge_list};
use gpm_core::Result;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(args: &RunArgs) -> Result<()> {
    let spec = args.to_spec()?;
    let (records, first) = run_benchmark(&spec)?;
    let text = emit_metrics(&records, spec.format)?;
    match &args.out {
        Some(p) => create(p)?.write_all(text.as_bytes())?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    if let Some(cell) = first {
        if let Some(path) = &args.results {
            let directed = spec.algorithms[0].directed_input();
            let graph = load_graph(&spec.input, directed, spec.workers[0], spec.seed)?;
            let mut out = create(path)?;
            write_values(&graph, &cell.values, &mut out)?;
            out.flush()?;
        }
        if let Some(path) = &args.summary {
            let mut out = create(path)?;
            write_summary(&cell.scalars, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let directed = args.algorithm == OracleAlgorithm::Pagerank;
    let graph = load_edge_list(BufReader::new(File::open(&args.input)?), directed)?;
    let mut scalars = Vec::new();
    let values = match args.algorithm {
        OracleAlgorithm::Cc => {
            let labels = oracle_components(&graph)?;
            scalars.push(("algorithm".to_string(), "cc".to_string()));
            scalars.push(("checksum".into(), hex(checksum_labels(&labels))));
            VertexValues::Labels(labels)
        }
        OracleAlgorithm::Pagerank => {
            let scores = oracle_pagerank(&graph, args.alpha, args.iterations)?;
            scalars.push(("algorithm".to_string(), "pagerank".to_string()));
            // dense summation rounds differently from the engines, so this
            // checksum only matches theirs by luck; compare --results instead
            scalars.push(("checksum".into(), hex(checksum_f64(&scores))));
            VertexValues::Scores(scores)
        }
        OracleAlgorithm::ClusteringExact => {
            let t = oracle_triangles(&graph)?;
            let local: Vec<Option<f64>> = graph.vertices().map(|v| t.local(&graph, v)).collect();
            scalars.push(("algorithm".to_string(), "clustering-exact".to_string()));
            scalars.push(("checksum".into(), hex(checksum_coefficients(&local))));
            scalars.push(("global".into(), t.global().to_string()));
            scalars.push(("triangles".into(), t.triangles.to_string()));
            scalars.push(("triplets".into(), t.triplets.to_string()));
            VertexValues::Coefficients(local)
        }
    };
    write_summary(&scalars, io::stdout().lock())?;
    if let Some(path) = &args.results {
        let mut out = create(path)?;
        write_values(&graph, &values, &mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let graph = dorogovtsev_mendes(args.vertices, args.seed)?;
    match &args.out {
        Some(p) => {
            let mut out = create(p)?;
            write_edge_list(&graph, &mut out)?;
            out.flush()?;
        }
        None => write_edge_list(&graph, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Oracle(a) => oracle(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gpm: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
