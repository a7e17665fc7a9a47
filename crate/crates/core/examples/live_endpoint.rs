//! The pipeline against any OpenAI-compatible vision chat endpoint, using
//! one model for detection, scoring and answering.
//!
//! SFA_BASE_URL=http://localhost:8000/v1 SFA_MODEL=qwen2-vl-7b-instruct \
//!   [SFA_API_KEY_ENV=MY_KEY_VAR] \
//!   cargo run --example live_endpoint -- <frames-dir> "<question>"

use std::sync::Arc;

use sfa::backends::{Backends, ChatAnswerer, ChatClient, ChatDetector, ChatScorer, EndpointConfig};
use sfa::media::FrameSource;
use sfa::pipeline::{Pipeline, PipelineConfig};
use sfa::prompt::PromptTemplate;

fn main() -> sfa::Result<()> {
    let (Ok(base), Ok(model)) = (std::env::var("SFA_BASE_URL"), std::env::var("SFA_MODEL")) else {
        eprintln!("set SFA_BASE_URL and SFA_MODEL (and optionally SFA_API_KEY_ENV)");
        return Ok(());
    };
    let mut args = std::env::args().skip(1);
    let (Some(frames), Some(question)) = (args.next(), args.next()) else {
        eprintln!("usage: live_endpoint <frames-dir> <question>");
        return Ok(());
    };

    let mut endpoint = EndpointConfig::new(base, model);
    endpoint.api_key_env = std::env::var("SFA_API_KEY_ENV").ok();
    let client = Arc::new(ChatClient::new(endpoint)?);
    let backends = Backends::new(
        Arc::new(ChatDetector::new(client.clone(), PromptTemplate::default_detection())),
        Arc::new(ChatScorer::new(client.clone())),
        Arc::new(ChatAnswerer::new(client)),
    );
    let pipeline = Pipeline::new(PipelineConfig::default(), backends)?;
    let result = pipeline.run_sfa(&FrameSource::open_directory(frames)?, &question)?;
    println!("{}", result.answer);
    eprintln!(
        "fallback: {:?}, refined frames: {}, timings: {:?}",
        result.refined.fallback_level,
        result.refined.frames.len(),
        result.timing
    );
    Ok(())
}
