//! Prompt templates with a `{question}` placeholder.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const QUESTION_PLACEHOLDER: &str = "{question}";

const DEFAULT_RELEVANCE: &str = "\
You are shown one region cropped from a video frame.
Question: {question}
How useful is this region, including any visible text, for answering the question?
Reply with a single number between 0 and 1, where 1 means the region clearly \
contains the information needed and 0 means it is unrelated.";

const DEFAULT_ANSWER: &str = "\
The images are frames from a video, in temporal order. Read the scene text \
carefully.
Question: {question}
Answer with a short phrase taken from the video where possible. Do not explain.";

const DEFAULT_DETECTION: &str = "\
Locate every line of text visible in the image. Output one JSON object per \
line, one per row, of the form \
{\"bbox\": [x0, y0, x1, y1], \"confidence\": c, \"text\": \"...\"} \
using pixel coordinates of the image. Output nothing else. If there is no \
text, output nothing.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    /// Loads a template file. Templates used with a question must contain the
    /// `{question}` placeholder.
    pub fn load(path: &Path, requires_question: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read prompt {}: {e}", path.display())))?;
        if requires_question && !text.contains(QUESTION_PLACEHOLDER) {
            return Err(Error::Config(format!(
                "prompt {} lacks the {QUESTION_PLACEHOLDER} placeholder",
                path.display()
            )));
        }
        Ok(Self { text })
    }

    pub fn default_relevance() -> Self {
        Self::new(DEFAULT_RELEVANCE)
    }

    pub fn default_answer() -> Self {
        Self::new(DEFAULT_ANSWER)
    }

    pub fn default_detection() -> Self {
        Self::new(DEFAULT_DETECTION)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn render(&self, question: &str) -> String {
        self.text.replace(QUESTION_PLACEHOLDER, question)
    }
}
