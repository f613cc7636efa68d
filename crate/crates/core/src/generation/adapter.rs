use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::lm::{normalize, LanguageModel, Vocab};
use super::{GenerationError, PromptSpec};
use crate::scalar::Scalar;

#[derive(Serialize)]
struct Request<'a> {
    context: &'a str,
    prompt: &'a str,
}

#[derive(Deserialize)]
struct Response {
    probs: HashMap<String, f64>,
}

struct Pipes {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// A language model served by an external process over newline-delimited
/// JSON on its standard streams.
///
/// Each request is `{"context": "...", "prompt": "..."}` and each response
/// `{"probs": {"字": p, ...}}`. Probabilities for characters outside the
/// vocabulary are dropped and the rest renormalized.
pub struct ProcessModel {
    name: String,
    vocab: Vocab,
    pipes: Mutex<Pipes>,
}

impl ProcessModel {
    pub fn spawn(program: &str, args: &[String], vocab: Vocab) -> Result<Self, GenerationError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| GenerationError::Model(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ProcessModel {
            name: format!("process:{program}"),
            vocab,
            pipes: Mutex::new(Pipes { child, stdin, stdout }),
        })
    }

    fn exchange(&self, request: &str) -> Result<String, GenerationError> {
        let io = |e: std::io::Error| GenerationError::Model(format!("model process: {e}"));
        let mut pipes = self.pipes.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(pipes.stdin, "{request}").map_err(io)?;
        pipes.stdin.flush().map_err(io)?;
        let mut line = String::new();
        if pipes.stdout.read_line(&mut line).map_err(io)? == 0 {
            return Err(GenerationError::Model("model process closed its output".into()));
        }
        Ok(line)
    }
}

impl Drop for ProcessModel {
    fn drop(&mut self) {
        let pipes = self.pipes.get_mut().unwrap_or_else(|e| e.into_inner());
        let _ = pipes.child.kill();
        let _ = pipes.child.wait();
    }
}

impl<S: Scalar> LanguageModel<S> for ProcessModel {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_distribution(&self, context: &[char], prompt: &PromptSpec) -> Result<Vec<S>, GenerationError> {
        let context: String = context.iter().collect();
        let prompt = prompt.serialize();
        let request = serde_json::to_string(&Request {
            context: &context,
            prompt: &prompt,
        })
        .expect("request serializes");
        let line = self.exchange(&request)?;
        let response: Response = serde_json::from_str(&line)
            .map_err(|e| GenerationError::Model(format!("bad model response: {e}")))?;
        let mut p = vec![S::zero(); self.vocab.len()];
        for (token, prob) in response.probs {
            if !prob.is_finite() || prob < 0.0 {
                return Err(GenerationError::Model(format!("invalid probability {prob} for {token:?}")));
            }
            let mut chars = token.chars();
            if let (Some(c), None) = (chars.next(), chars.next()) {
                if let Some(i) = self.vocab.index_of(c) {
                    p[i] = p[i] + S::lit(prob);
                }
            }
        }
        normalize(&mut p);
        Ok(p)
    }
}
