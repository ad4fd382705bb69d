use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde_json::json;
use viewvec_core::embedding::{write_tsv_header, write_tsv_row};
use viewvec_core::eval::{
    ari, classify_eval, kmeans_restarts, link_predict_eval, stratified_split, ClassifyOptions, LinkOptions, RecGraph,
};
use viewvec_core::graph::{parse_record, read_records};
use viewvec_core::vocab::hash_token_id;
use viewvec_core::{
    default_views, generate_synthetic, get_subgraphs, read_checkpoint, train_with_report, validate, write_checkpoint,
    Dataset, EmbeddingSet, Model, Record, SynthConfig, ViewMode,
};

use crate::cli::*;
use crate::config::{read_json, EvalOptions, RunConfig};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

/// Loads a dataset declared over `views`, keeping only the graphs of
/// `keep`.
fn load_restricted(path: &Path, views: &[String], keep: &[String]) -> Result<Dataset> {
    let dataset = viewvec_core::load_dataset(path, views)?;
    if keep == views {
        return Ok(dataset);
    }
    let records = dataset
        .records
        .into_iter()
        .map(|mut r| {
            r.graphs.retain(|v, _| keep.contains(v));
            r
        })
        .collect();
    Ok(Dataset::new(keep.to_vec(), records)?)
}

fn parse_split(spec: &str) -> Result<BTreeMap<String, Vec<usize>>> {
    let bad = || CliError::usage(format!("bad --split {spec:?}; expected e.g. api=0,1;perm=2"));
    let mut split = BTreeMap::new();
    for part in spec.split(';').filter(|p| !p.trim().is_empty()) {
        let (view, classes) = part.split_once('=').ok_or_else(bad)?;
        let classes = classes
            .split(',')
            .filter(|c| !c.trim().is_empty())
            .map(|c| c.trim().parse().map_err(|_| bad()))
            .collect::<Result<Vec<usize>>>()?;
        split.insert(view.trim().to_string(), classes);
    }
    Ok(split)
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    macro_rules! set {
        ($($field:ident <- $arg:ident),*) => {
            $(if let Some(x) = args.$arg { cfg.$field = x; })*
        };
    }
    set!(num_classes <- classes, records_per_class <- per_class, nodes_per_graph <- nodes,
         alphabet_size <- alphabet, out_degree <- out_degree, class_signal_strength <- strength,
         label_fraction <- label_fraction, seed <- seed);
    if let Some(v) = &args.views {
        cfg.views = v.clone();
    }
    if let Some(s) = &args.split {
        cfg.view_signal_split = Some(parse_split(s)?);
    }
    let synthetic = generate_synthetic(&cfg)?;
    synthetic.dataset.write(&args.out)?;
    if let Some(path) = &args.truth {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["record_id", "label"])?;
        for (id, label) in synthetic.truth() {
            w.write_record([id, label])?;
        }
        w.flush()?;
    }
    log::info!(
        "wrote {} records ({} classes) to {}",
        synthetic.dataset.len(),
        cfg.num_classes,
        args.out.display()
    );
    Ok(())
}

pub fn extract(args: ExtractArgs) -> Result<()> {
    let views = args.views.unwrap_or_else(default_views);
    let dataset = viewvec_core::load_dataset(&args.dataset, &views)?;
    let mut out = output(args.out.as_deref())?;
    let mut found = false;
    for record in &dataset.records {
        if args.record.as_ref().is_some_and(|id| id != &record.id) {
            continue;
        }
        found = true;
        for view in &dataset.views {
            let Some(graph) = record.graph(view) else { continue };
            for token in get_subgraphs(graph, args.max_degree) {
                write!(out, "{}\t{}\t{}", token.view, token.degree, token.text)?;
                if args.hashed {
                    write!(out, "\t{}", hash_token_id(&token.key(), args.capacity))?;
                }
                writeln!(out)?;
            }
        }
    }
    out.flush()?;
    match (&args.record, found) {
        (Some(id), false) => Err(CliError::data(format!("record {id} not found"))),
        _ => Ok(()),
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut run = RunConfig::load(args.config.as_deref())?;
    run.apply(&args);
    let keep = run.resolve_views()?;
    run.train.validate()?;
    let dataset_path = run
        .dataset
        .clone()
        .ok_or_else(|| CliError::usage("no dataset given (--dataset or \"dataset\" in the config)"))?;
    if run.checkpoint.is_none() && run.export.is_none() {
        return Err(CliError::usage("nothing to write; pass --checkpoint and/or --export"));
    }
    log::info!(
        "config {}",
        serde_json::to_string(&run).expect("config serialization cannot fail")
    );
    if run.train.threads > 1 {
        eprintln!(
            "warning: --threads {} selects lock-free parallel training; results are not bit-reproducible",
            run.train.threads
        );
    }

    let dataset = load_restricted(&dataset_path, &run.views, &keep)?;
    log::info!(
        "loaded {} records, {} labels from {}",
        dataset.len(),
        dataset.label_alphabet.len(),
        dataset_path.display()
    );
    let epochs = run.train.epochs;
    let view_names = match &run.train.view_mode {
        ViewMode::Single(v) => vec![v.clone()],
        ViewMode::Multi => dataset.views.clone(),
    };
    let (model, report) = train_with_report(&dataset, &run.train, |stats| {
        let losses: Vec<String> = view_names
            .iter()
            .zip(&stats.view_loss)
            .map(|(v, l)| format!("{v}={l:.4}"))
            .collect();
        let label = stats.label_loss.map_or_else(|| "-".to_string(), |l| format!("{l:.4}"));
        log::info!(
            "epoch {}/{epochs} loss {} label={label} lr={:.5} time={:.1}ms",
            stats.epoch,
            losses.join(" "),
            stats.learning_rate,
            stats.elapsed.as_secs_f64() * 1e3
        );
    })?;
    if report.degenerate_graphs > 0 {
        log::info!("{} empty view graphs were skipped", report.degenerate_graphs);
    }
    if let Some(path) = &run.checkpoint {
        write_checkpoint(&model, path)?;
        log::info!("checkpoint written to {}", path.display());
    }
    if let Some(path) = &run.export {
        model.export().write_tsv(create(path)?)?;
        log::info!("embeddings written to {}", path.display());
    }
    Ok(())
}

pub fn export(args: ExportArgs) -> Result<()> {
    let model = read_checkpoint(&args.checkpoint)?;
    let mut out = output(args.out.as_deref())?;
    model.export().write_tsv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn prepare_record(record: &mut Record, declared: &[String], model: &Model) -> Result<()> {
    validate(record, declared).map_err(|v| CliError::from(v.into_error(&record.id)))?;
    record.graphs.retain(|v, _| model.views().contains(v));
    Ok(())
}

pub fn embed(args: EmbedArgs) -> Result<()> {
    let mut model = read_checkpoint(&args.checkpoint)?;
    if !model.is_online() {
        return Err(CliError::usage(
            "checkpoint uses dictionary vocabularies; online embedding needs a model trained with --vocab online",
        ));
    }
    let declared = args.views.unwrap_or_else(default_views);
    let input: Box<dyn BufRead> = if args.input.as_os_str() == "-" {
        Box::new(BufReader::new(io::stdin().lock()))
    } else {
        Box::new(open(&args.input)?)
    };
    let mut out = output(args.out.as_deref())?;
    write_tsv_header(&mut out, model.dim())?;
    out.flush()?;
    let mut count = 0usize;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut record = parse_record(&line, i + 1)?;
        prepare_record(&mut record, &declared, &model)?;
        let vector = model.embed_online(&record, args.steps, args.freeze, args.seed)?;
        write_tsv_row(&mut out, &record.id, &vector)?;
        out.flush()?;
        count += 1;
    }
    log::info!("embedded {count} records");
    if let Some(path) = &args.save {
        write_checkpoint(&model, path)?;
    }
    Ok(())
}

fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    Ok(EmbeddingSet::read_tsv(open(path)?)?)
}

/// `record_id,label` rows; a leading `record_id,label` header is skipped.
pub fn read_labels(path: &Path) -> Result<HashMap<String, String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut labels = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        if row.len() != 2 {
            return Err(CliError::data(format!(
                "{}:{}: expected record_id,label",
                path.display(),
                i + 1
            )));
        }
        if i == 0 && &row[0] == "record_id" && &row[1] == "label" {
            continue;
        }
        if labels.insert(row[0].to_string(), row[1].to_string()).is_some() {
            return Err(CliError::data(format!("{}: record {} labeled twice", path.display(), &row[0])));
        }
    }
    Ok(labels)
}

pub fn read_edges(path: &Path) -> Result<Vec<(String, String)>> {
    let mut edges = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, b) = line
            .split_once('\t')
            .ok_or_else(|| CliError::data(format!("{}:{}: expected id1<TAB>id2", path.display(), i + 1)))?;
        edges.push((a.trim().to_string(), b.trim().to_string()));
    }
    Ok(edges)
}

/// Embedded records that carry a label, in embedding order.
fn labeled_rows(set: &EmbeddingSet, labels: &HashMap<String, String>) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let (x, y): (Vec<_>, Vec<_>) = set
        .ids()
        .iter()
        .zip(set.vectors())
        .filter_map(|(id, v)| labels.get(id).map(|l| (v.clone(), l.clone())))
        .unzip();
    if x.is_empty() {
        return Err(CliError::data("no embedded record has a label"));
    }
    Ok((x, y))
}

fn eval_options(input: &EvalInput) -> Result<EvalOptions> {
    let mut opts = RunConfig::load(input.config.as_deref())?.eval;
    if let Some(seed) = input.seed {
        opts.seed = seed;
    }
    Ok(opts)
}

pub fn eval_cluster(args: EvalClusterArgs) -> Result<()> {
    let opts = eval_options(&args.input)?;
    let set = read_embeddings(&args.input.embeddings)?;
    let labels = read_labels(&args.labels)?;
    let (x, y) = labeled_rows(&set, &labels)?;
    let k = args
        .k
        .unwrap_or_else(|| y.iter().collect::<BTreeSet<_>>().len());
    let km = kmeans_restarts(
        &x,
        k,
        opts.seed,
        args.max_iter.unwrap_or(opts.max_iter),
        args.restarts.unwrap_or(opts.restarts),
    )?;
    let score = ari(&km.assignments, &y)?;
    print_json(&json!({
        "ari": score,
        "k": k,
        "n": x.len(),
        "unlabeled_skipped": set.len() - x.len(),
        "inertia": km.inertia,
        "iterations": km.iterations,
        "seed": opts.seed,
    }))
}

pub fn eval_classify(args: EvalClassifyArgs) -> Result<()> {
    let opts = eval_options(&args.input)?;
    let fraction = args.train_fraction.unwrap_or(opts.train_fraction);
    let set = read_embeddings(&args.input.embeddings)?;
    let labels = read_labels(&args.labels)?;
    let (x, y) = labeled_rows(&set, &labels)?;
    let (train, test) = stratified_split(&y, fraction, opts.seed)?;
    let pick = |rows: &[usize]| -> (Vec<Vec<f64>>, Vec<String>) {
        rows.iter().map(|&i| (x[i].clone(), y[i].clone())).unzip()
    };
    let (train_x, train_y) = pick(&train);
    let (test_x, test_y) = pick(&test);
    let report = classify_eval(
        &train_x,
        &train_y,
        &test_x,
        &test_y,
        &ClassifyOptions {
            positive: args.positive,
            ..Default::default()
        },
    )?;
    let mut value = serde_json::to_value(&report).expect("report serialization cannot fail");
    value["train_fraction"] = json!(fraction);
    value["seed"] = json!(opts.seed);
    print_json(&value)
}

pub fn eval_link(args: EvalLinkArgs) -> Result<()> {
    let opts = eval_options(&args.input)?;
    let set = read_embeddings(&args.input.embeddings)?;
    let graph = RecGraph::new(&read_edges(&args.edges)?, &set)?;
    let fraction = args.remove_fraction.unwrap_or(opts.remove_fraction);
    let link = LinkOptions {
        folds: args.folds.unwrap_or(opts.folds),
        negative_ratio: args.negative_ratio.unwrap_or(opts.negative_ratio),
        ..Default::default()
    };
    let report = link_predict_eval(&set, &graph, fraction, opts.seed, &link)?;
    let mut value = serde_json::to_value(&report).expect("report serialization cannot fail");
    value["remove_fraction"] = json!(fraction);
    value["nodes"] = json!(graph.nodes().len());
    value["seed"] = json!(opts.seed);
    print_json(&value)
}

pub fn inspect_vocab(args: InspectVocabArgs) -> Result<()> {
    let model = read_checkpoint(&args.checkpoint)?;
    let mut out = io::stdout().lock();
    for (view, layer) in model.views().iter().zip(model.outputs()) {
        let vocab = &layer.vocab;
        writeln!(
            out,
            "{view}\tK={}\tcapacity={}\tbuckets={}\thashes={}",
            vocab.observed(),
            vocab.capacity(),
            layer.table.buckets(),
            layer.table.k()
        )?;
        for (token, count) in vocab.top(args.top) {
            writeln!(out, "  {count}\t{token}")?;
        }
    }
    Ok(())
}

pub fn rebuild_noise(args: RebuildNoiseArgs) -> Result<()> {
    let mut model = read_checkpoint(&args.checkpoint)?;
    let declared = args.views.unwrap_or_else(default_views);
    let mut records = read_records(open(&args.dataset)?)?;
    for r in &mut records {
        prepare_record(r, &declared, &model)?;
    }
    model.rebuild_noise(&records)?;
    let out = args.out.as_ref().unwrap_or(&args.checkpoint);
    write_checkpoint(&model, out)?;
    log::info!("noise rebuilt from {} records; written to {}", records.len(), out.display());
    Ok(())
}
