use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use base64::Engine as _;
use clap::Args;
use cuedr_core::pack::{validate_dir, PackBundle, ValidationReport};
use cuedr_service::views::PackUpload;
use serde::Serialize;

use crate::output::Output;
use crate::CmdResult;

#[derive(Args)]
pub struct ValidateArgs {
    /// Pack directory holding pack.toml and images/.
    dir: PathBuf,
    /// Keywords every portfolio must have.
    #[arg(long, default_value_t = 26)]
    keys: usize,
    /// Fewest portfolios the pack may have (the credential length).
    #[arg(long, default_value_t = 6)]
    min_portfolios: usize,
}

fn report_text(dir: &std::path::Path, report: &ValidationReport) -> String {
    let mut s = String::new();
    for d in &report.diagnostics {
        let _ = writeln!(s, "{}: {d}", dir.display());
    }
    let _ = writeln!(
        s,
        "{}: {} portfolios, {} diagnostics",
        dir.display(),
        report.portfolios,
        report.diagnostics.len()
    );
    s
}

pub fn validate(args: ValidateArgs, out: &Output) -> CmdResult {
    let report = validate_dir(&args.dir, args.keys, args.min_portfolios);
    out.emit(&report, || report_text(&args.dir, &report))?;
    Ok(if report.is_clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

#[derive(Args)]
pub struct FixtureArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of portfolios.
    #[arg(long, default_value_t = 18)]
    portfolios: usize,
    /// Keywords per portfolio.
    #[arg(long, default_value_t = 26)]
    keys: usize,
    /// Output directory; created if missing, must not already hold a pack.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct FixtureSummary<'a> {
    dir: &'a std::path::Path,
    seed: u64,
    portfolios: usize,
    keywords_per_portfolio: usize,
    images: usize,
    validation: ValidationReport,
}

pub fn generate_fixture(args: FixtureArgs, out: &Output) -> CmdResult {
    if args.out.join(cuedr_core::pack::MANIFEST_FILE).exists() {
        return Err(format!("{} already contains a pack", args.out.display()).into());
    }
    let bundle = cuedr_core::pack::generate_fixture(args.seed, args.portfolios, args.keys);
    bundle.write_dir(&args.out)?;
    let validation = validate_dir(&args.out, args.keys, 1);
    let summary = FixtureSummary {
        dir: &args.out,
        seed: args.seed,
        portfolios: args.portfolios,
        keywords_per_portfolio: args.keys,
        images: bundle.images.len(),
        validation,
    };
    out.emit(&summary, || {
        format!(
            "wrote {} portfolios x {} keywords ({} images) to {}\n{}",
            summary.portfolios,
            summary.keywords_per_portfolio,
            summary.images,
            summary.dir.display(),
            report_text(summary.dir, &summary.validation)
        )
    })?;
    Ok(if summary.validation.is_clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

#[derive(Args)]
pub struct ImportArgs {
    dir: PathBuf,
    /// Base URL of the service.
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    url: String,
    /// Admin bearer token; defaults to $CUEDR_ADMIN_TOKEN.
    #[arg(long)]
    token: Option<String>,
    #[arg(long, default_value_t = 26)]
    keys: usize,
    #[arg(long, default_value_t = 6)]
    min_portfolios: usize,
}

pub fn upload_body(bundle: &PackBundle) -> PackUpload {
    PackUpload {
        manifest: bundle.manifest.to_toml(),
        images: bundle
            .images
            .iter()
            .map(|(name, bytes)| {
                (
                    name.clone(),
                    base64::engine::general_purpose::STANDARD.encode(bytes),
                )
            })
            .collect(),
    }
}

pub fn import(args: ImportArgs, out: &Output) -> CmdResult {
    let report = validate_dir(&args.dir, args.keys, args.min_portfolios);
    if !report.is_clean() {
        out.emit(&report, || report_text(&args.dir, &report))?;
        return Ok(ExitCode::FAILURE);
    }
    let token = args
        .token
        .or_else(|| std::env::var("CUEDR_ADMIN_TOKEN").ok())
        .ok_or("no admin token: pass --token or set CUEDR_ADMIN_TOKEN")?;
    let bundle = PackBundle::load_dir(&args.dir)?;
    let body = serde_json::to_vec(&upload_body(&bundle))?;
    let url = format!("{}/admin/pack", args.url.trim_end_matches('/'));
    let mut response = ureq::post(&url)
        .config()
        .http_status_as_error(false)
        .build()
        .header("authorization", &format!("Bearer {token}"))
        .header("content-type", "application/json")
        .send(&body[..])?;
    let status = response.status();
    let text = response.body_mut().read_to_string()?;
    let value: serde_json::Value =
        serde_json::from_str(&text).unwrap_or(serde_json::Value::String(text));
    out.emit(&value, || {
        format!(
            "{} {}\n",
            status.as_u16(),
            serde_json::to_string_pretty(&value).unwrap_or_default()
        )
    })?;
    Ok(if status.is_success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
