use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use posefuse_core::image::{blur_average, composite, encode_png, load_png, luminance, CompositeJob, Image, ImageError};
use posefuse_core::loss::{ta_loss, LossReport};
use posefuse_core::pose::{read_jsonl_path, HandPose, Point2};
use posefuse_core::pq::{load_index, retrieve_pq, PqIndex, SearchParams};
use posefuse_core::{retrieve_exact, Affine2D, LossWeights};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::index::check_bank;
use crate::manifest::{job_id, resolve, Job, Manifest};
use crate::{emit_json, write_file, CliError};

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Args)]
pub struct CompositeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Overrides the manifest's output directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Record per-job wall time in the report (makes it non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Annotation {
    pub id: String,
    pub image: String,
    pub keypoints: Vec<Point2>,
    /// Bank id of the retrieved pose, or the foreground path.
    pub source_id: String,
    pub transform: Affine2D,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct JobReport {
    pub id: String,
    /// `ok` or the failure kind.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transform: Option<Affine2D>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub jobs: Vec<JobReport>,
    pub succeeded: usize,
    pub failed: usize,
    pub annotations: String,
}

struct Bank {
    poses: Vec<HandPose>,
    index: Option<PqIndex>,
    shortlist: usize,
}

struct JobFailure {
    kind: &'static str,
    message: String,
}

impl From<ImageError> for JobFailure {
    fn from(e: ImageError) -> Self {
        let kind = match e {
            ImageError::OutOfFrame => "OutOfFrame",
            ImageError::SingularTransform => "SingularTransform",
            ImageError::Io(_) => "IoError",
            ImageError::Decode(_) => "DecodeError",
            _ => "ImageError",
        };
        JobFailure { kind, message: e.to_string() }
    }
}

impl From<CliError> for JobFailure {
    fn from(e: CliError) -> Self {
        let kind = match e {
            CliError::Parse(_) => "ParseError",
            CliError::Io(_) => "IoError",
            _ => "InvalidJob",
        };
        JobFailure { kind, message: e.to_string() }
    }
}

struct Placement {
    transform: Affine2D,
    source_id: String,
    keypoints: HandPose,
    foreground: PathBuf,
    mask: PathBuf,
}

fn single_channel(img: Image) -> Image {
    if img.channels() == 1 {
        return img;
    }
    let (w, h) = (img.width(), img.height());
    Image::new(w, h, 1, luminance(&img).into_iter().map(|v| v.clamp(0.0, 1.0)).collect()).expect("luminance in range")
}

fn place(job: &Job, id: &str, base: &Path, bank: Option<&Bank>) -> Result<Placement, JobFailure> {
    if let Some(transform) = job.transform {
        let keypoints = job.keypoints.as_ref().expect("validated").load(base, id)?;
        return Ok(Placement {
            transform,
            source_id: job.foreground.clone(),
            keypoints,
            foreground: resolve(base, &job.foreground),
            mask: resolve(base, &job.mask),
        });
    }
    let bank = bank.expect("validated");
    let target = job.target_pose.as_ref().expect("validated").load(base, id)?;
    let matches = match &bank.index {
        Some(index) => {
            let params = SearchParams::new(bank.shortlist.max(1), 1).map_err(CliError::from)?;
            retrieve_pq(index, &bank.poses, &target, &params).map_err(CliError::from)?
        }
        None => retrieve_exact(&bank.poses, &target, 1).map_err(CliError::from)?,
    };
    let best = matches
        .into_iter()
        .next()
        .ok_or(JobFailure { kind: "RetrievalFailed", message: "no alignable bank pose".into() })?;
    let keypoints = match &job.keypoints {
        Some(src) => src.load(base, id)?,
        None => bank.poses[best.bank_index].clone(),
    };
    let expand = |t: &str| resolve(base, t.replace("{id}", &best.candidate_id));
    Ok(Placement {
        transform: best.transform,
        foreground: expand(&job.foreground),
        mask: expand(&job.mask),
        source_id: best.candidate_id,
        keypoints,
    })
}

struct JobOutput {
    image: Vec<u8>,
    annotation: Annotation,
    report: JobReport,
}

fn run_job(
    manifest: &Manifest,
    job: &Job,
    id: &str,
    base: &Path,
    bank: Option<&Bank>,
) -> Result<JobOutput, (Option<Box<Placement>>, JobFailure)> {
    let placement = place(job, id, base, bank).map_err(|f| (None, f))?;
    let render = || -> Result<(Image, HandPose, Option<LossReport>), JobFailure> {
        let foreground = load_png(&placement.foreground)?;
        let mask = single_channel(load_png(&placement.mask)?);
        let background = load_png(resolve(base, &job.background))?;
        let (out, kp) = composite(&CompositeJob {
            foreground,
            mask,
            transform: placement.transform,
            background: background.clone(),
            keypoints: placement.keypoints.clone(),
        })?;
        let loss = if manifest.loss {
            let x_b = blur_average(&background, manifest.blur_radius);
            let report = ta_loss(LossWeights::default(), &background, &out, &x_b, manifest.histogram_bins)
                .map_err(|e| JobFailure { kind: "LossError", message: e.to_string() })?;
            Some(report)
        } else {
            None
        };
        Ok((out, kp, loss))
    };
    let (out, kp, loss) = match render() {
        Ok(v) => v,
        Err(f) => return Err((Some(Box::new(placement)), f)),
    };
    let image = encode_png(&out).map_err(|e| (None, e.into()))?;
    let file = format!("{id}.png");
    Ok(JobOutput {
        image,
        annotation: Annotation {
            id: id.to_string(),
            image: file.clone(),
            keypoints: kp.keypoints().to_vec(),
            source_id: placement.source_id.clone(),
            transform: placement.transform,
            seed: manifest.seed,
        },
        report: JobReport {
            id: id.to_string(),
            status: "ok".into(),
            error: None,
            output: Some(file),
            source_id: Some(placement.source_id),
            transform: Some(placement.transform),
            loss,
            timing_ms: None,
        },
    })
}

fn load_bank(manifest: &Manifest, base: &Path) -> Result<Option<Bank>, CliError> {
    let Some(bank_ref) = &manifest.bank else {
        return Ok(None);
    };
    let poses = read_jsonl_path(resolve(base, &bank_ref.poses))?;
    let index = match &bank_ref.index {
        Some(p) => {
            let index = load_index(resolve(base, p))?;
            check_bank(&index, &poses)?;
            Some(index)
        }
        None => None,
    };
    Ok(Some(Bank { poses, index, shortlist: bank_ref.shortlist }))
}

pub fn run(args: &CompositeArgs) -> Result<(), CliError> {
    let (manifest, base) = crate::manifest::Manifest::load(&args.manifest)?;
    let out_dir = match &args.output_dir {
        Some(d) => d.clone(),
        None => resolve(&base, &manifest.output_dir),
    };
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let bank = load_bank(&manifest, &base)?;

    let results: Vec<(JobReport, Option<Annotation>)> = manifest
        .jobs
        .par_iter()
        .enumerate()
        .map(|(i, job)| {
            let id = job_id(job, i);
            let start = Instant::now();
            let (mut report, annotation) = match run_job(&manifest, job, &id, &base, bank.as_ref()) {
                Ok(output) => match write_file(&out_dir.join(&output.annotation.image), &output.image) {
                    Ok(()) => (output.report, Some(output.annotation)),
                    Err(e) => (failed_report(&id, None, e.into()), None),
                },
                Err((placement, failure)) => (failed_report(&id, placement, failure), None),
            };
            if args.timing {
                report.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            (report, annotation)
        })
        .collect();

    let mut annotations = Vec::new();
    for (_, a) in &results {
        if let Some(a) = a {
            annotations.extend(serde_json::to_vec(a)?);
            annotations.push(b'\n');
        }
    }
    write_file(&out_dir.join(ANNOTATIONS_FILE), &annotations)?;
    let jobs: Vec<JobReport> = results.into_iter().map(|(r, _)| r).collect();
    let failed = jobs.iter().filter(|j| j.status != "ok").count();
    let report = RunReport { succeeded: jobs.len() - failed, failed, jobs, annotations: ANNOTATIONS_FILE.into() };
    emit_json(&report, Some(&out_dir.join(REPORT_FILE)))?;
    for job in report.jobs.iter().filter(|j| j.status != "ok") {
        log::warn!("job {} failed: {}", job.id, job.error.as_deref().unwrap_or(&job.status));
    }
    println!(
        "{}",
        serde_json::json!({ "succeeded": report.succeeded, "failed": report.failed, "report": out_dir.join(REPORT_FILE) })
    );
    if failed > 0 {
        return Err(CliError::PartialFailure { failed, total: report.jobs.len() });
    }
    Ok(())
}

fn failed_report(id: &str, placement: Option<Box<Placement>>, failure: JobFailure) -> JobReport {
    JobReport {
        id: id.to_string(),
        status: failure.kind.to_string(),
        error: Some(failure.message),
        output: None,
        source_id: placement.as_ref().map(|p| p.source_id.clone()),
        transform: placement.map(|p| p.transform),
        loss: None,
        timing_ms: None,
    }
}
