use std::collections::BTreeMap;

use crate::case::{ParameterList, SkillCall};
use crate::perception::{escape_attr, filter_widgets, GuiState, RawNode, Rect, RgbImage};
use crate::skills::{self, resolve_markers, SkillLibrary};

use super::scenario::{ArgMatcher, Scenario, ScenarioError, SideEffect, TransitionDef, WidgetDef};
use super::{Capabilities, DeviceBackend, DeviceError, ExecutionResult, Observation};

const BACKGROUND: [u8; 3] = [255, 255, 255];
const TEXT_GRAY: [u8; 3] = [80, 80, 80];
const LINK_BLUE: [u8; 3] = [25, 118, 210];

#[derive(Debug, Clone, PartialEq, Eq)]
struct SimState {
    page: String,
    text_overrides: BTreeMap<(String, usize), String>,
    history: Vec<String>,
    keyboard_input: String,
    effects: Vec<String>,
}

impl SimState {
    fn fresh(page: &str) -> Self {
        Self {
            page: page.to_string(),
            text_overrides: BTreeMap::new(),
            history: Vec::new(),
            keyboard_input: String::new(),
            effects: Vec::new(),
        }
    }
}

/// Deterministic app simulator driven by a [`Scenario`].
#[derive(Debug, Clone)]
pub struct Simulator {
    scenario: Scenario,
    library: SkillLibrary,
    state: SimState,
}

impl Simulator {
    /// Binds `${param}` trigger matchers and side-effect values to `params`.
    pub fn new(scenario: Scenario, params: &ParameterList) -> Result<Self, ScenarioError> {
        let library = SkillLibrary::default();
        scenario.validate(&library)?;
        let mut scenario = scenario;
        for t in &mut scenario.transitions {
            for m in t.trigger.args.values_mut() {
                if let ArgMatcher::Param(name) = m {
                    let v = params
                        .get(name)
                        .ok_or_else(|| ScenarioError::UnknownParameter(name.clone()))?;
                    *m = ArgMatcher::Exact(v.to_string());
                }
            }
            for SideEffect::SetText { value, .. } in &mut t.side_effects {
                *value = resolve_markers(value, params).ok_or_else(|| {
                    ScenarioError::UnknownParameter(crate::rewriting::placeholders(value).join(","))
                })?;
            }
        }
        scenario.check_ambiguity()?;
        let state = SimState::fresh(&scenario.initial_page);
        Ok(Self { scenario, library, state })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn page(&self) -> &str {
        &self.state.page
    }

    /// Digits entered through the numeric keyboard so far.
    pub fn keyboard_input(&self) -> &str {
        &self.state.keyboard_input
    }

    /// Log of in-app effects applied since the last reset.
    pub fn effects(&self) -> &[String] {
        &self.state.effects
    }

    fn widgets(&self) -> &[WidgetDef] {
        &self.scenario.pages[&self.state.page].widgets
    }

    fn text_of(&self, idx: usize) -> &str {
        self.state
            .text_overrides
            .get(&(self.state.page.clone(), idx))
            .map(String::as_str)
            .unwrap_or(&self.widgets()[idx].text)
    }

    fn raw_nodes(&self) -> Vec<RawNode> {
        self.widgets()
            .iter()
            .enumerate()
            .map(|(i, w)| RawNode {
                widget_class: w.widget_class.clone(),
                resource_id: w.resource_id.clone(),
                content_desc: w.content_desc.clone(),
                text: self.text_of(i).to_string(),
                clickable: w.clickable,
                scrollable: w.scrollable,
                bounds: w.bounds,
            })
            .collect()
    }

    /// Maps an agent-visible resource id (possibly mocked) to a widget index.
    fn resolve_rid(&self, rid: &str) -> Option<usize> {
        let raw = self.raw_nodes();
        let kept: Vec<usize> = raw
            .iter()
            .enumerate()
            .filter(|(_, n)| !(n.text.is_empty() && n.content_desc.is_empty()))
            .map(|(i, _)| i)
            .collect();
        filter_widgets(&raw)
            .iter()
            .zip(kept)
            .find(|(w, _)| w.resource_id == rid)
            .map(|(_, i)| i)
    }

    pub fn render_xml(&self) -> String {
        let mut xml = String::from(
            "<?xml version='1.0' encoding='UTF-8' standalone='yes' ?>\n<hierarchy rotation=\"0\">\n",
        );
        for (i, n) in self.raw_nodes().iter().enumerate() {
            xml.push_str(&format!(
                "  <node index=\"{i}\" text=\"{}\" resource-id=\"{}\" class=\"{}\" package=\"{}\" content-desc=\"{}\" checkable=\"false\" checked=\"false\" clickable=\"{}\" enabled=\"true\" focusable=\"{}\" focused=\"false\" scrollable=\"{}\" long-clickable=\"false\" password=\"false\" selected=\"false\" bounds=\"{}\" />\n",
                escape_attr(&n.text),
                escape_attr(&n.resource_id),
                escape_attr(&n.widget_class),
                escape_attr(&self.scenario.package),
                escape_attr(&n.content_desc),
                n.clickable,
                n.clickable,
                n.scrollable,
                n.bounds.to_bounds_string(),
            ));
        }
        xml.push_str("</hierarchy>\n");
        xml
    }

    /// Pages with hyperlinks get a synthetic screenshot: grey bars for text,
    /// blue glyph columns for link text.
    pub fn render_screenshot(&self) -> Option<RgbImage> {
        if !self.widgets().iter().any(|w| !w.links.is_empty()) {
            return None;
        }
        let screen = self.scenario.screen;
        let mut img = RgbImage::filled(screen.width, screen.height, BACKGROUND);
        for (i, w) in self.widgets().iter().enumerate() {
            if self.text_of(i).is_empty() && w.content_desc.is_empty() {
                continue;
            }
            let b = w.bounds;
            let inset = b.height() / 4;
            img.fill_rect(Rect::new(b.x1 + 4, b.y1 + inset, b.x2 - 4, b.y2 - inset), TEXT_GRAY);
        }
        for w in self.widgets() {
            for link in &w.links {
                let r = link.bounds;
                img.fill_rect(r, BACKGROUND);
                for x in r.x1..r.x2 {
                    if (x - r.x1) % 9 < 7 || x == r.x2 - 1 {
                        img.fill_rect(Rect::new(x, r.y1, x + 1, r.y2), LINK_BLUE);
                    }
                }
            }
        }
        Some(img)
    }

    fn find_transition(&self, call: &SkillCall) -> Option<&TransitionDef> {
        self.scenario
            .transitions
            .iter()
            .find(|t| t.from == self.state.page && t.trigger.matches(call))
    }

    fn apply_transition(&mut self, t: TransitionDef, call: &SkillCall) {
        let from = std::mem::replace(&mut self.state.page, t.to.clone());
        self.state.history.push(from.clone());
        for SideEffect::SetText { page, rid, value } in &t.side_effects {
            let page = page.clone().unwrap_or_else(|| t.to.clone());
            if let Some(idx) = self.scenario.pages[&page]
                .widgets
                .iter()
                .position(|w| &w.resource_id == rid)
            {
                self.state.text_overrides.insert((page, idx), value.clone());
            }
        }
        self.state.effects.push(format!("{call} moved {from} -> {}", t.to));
    }

    fn set_text(&mut self, idx: usize, value: String, call: &SkillCall) {
        self.state
            .text_overrides
            .insert((self.state.page.clone(), idx), value);
        self.state.effects.push(format!("{call} on {}", self.state.page));
    }

    fn run(&mut self, call: &SkillCall, state: &GuiState) -> ExecutionResult {
        let Some(spec) = self.library.get(&call.skill_name) else {
            return ExecutionResult::rejected(format!("unknown command {}", call.skill_name));
        };
        if call.args.len() != spec.args.len() || spec.args.iter().any(|a| call.arg(&a.name).is_none()) {
            return ExecutionResult::rejected("argument mismatch");
        }
        let target = match call.arg("rid") {
            Some(rid) => match self.resolve_rid(rid) {
                Some(i) => Some(i),
                None => return ExecutionResult::rejected(format!("no widget {rid} on the current page")),
            },
            None => None,
        };

        if call.skill_name == skills::CLICK {
            let idx = target.expect("click has rid");
            let w = &self.widgets()[idx];
            if !w.links.is_empty() {
                let rid = call.arg("rid").unwrap_or_default();
                let bounds = state.find(rid).map_or(w.bounds, |p| p.bounds);
                let (x, y) = bounds.center();
                if !w.links.iter().any(|l| l.bounds.contains_point(x, y)) {
                    return ExecutionResult::rejected(format!(
                        "tap at ({x}, {y}) missed the hyperlink text"
                    ));
                }
            }
        }
        if call.skill_name == skills::INPUT_BY_NUMERIC_KEYBOARD {
            let digits = call.arg("digits").unwrap_or_default();
            for d in digits.chars() {
                let present = (0..self.widgets().len()).any(|i| {
                    let mut buf = [0u8; 4];
                    self.text_of(i) == d.encode_utf8(&mut buf)
                });
                if !present {
                    return ExecutionResult::rejected(format!("digit widget missing: {d}"));
                }
            }
        }

        if let Some(t) = self.find_transition(call).cloned() {
            if call.skill_name == skills::INPUT_BY_NUMERIC_KEYBOARD {
                self.state.keyboard_input.push_str(call.arg("digits").unwrap_or_default());
            }
            self.apply_transition(t, call);
            return ExecutionResult::applied();
        }

        match call.skill_name.as_str() {
            skills::INPUT_TEXT => {
                let idx = target.expect("input_text has rid");
                if !self.widgets()[idx].is_editable() {
                    return ExecutionResult::rejected(format!(
                        "widget {} is not editable",
                        call.arg("rid").unwrap_or_default()
                    ));
                }
                let text = call.arg("text").unwrap_or_default().to_string();
                self.set_text(idx, text, call);
                ExecutionResult::applied()
            }
            skills::INPUT_BY_NUMERIC_KEYBOARD => {
                self.state.keyboard_input.push_str(call.arg("digits").unwrap_or_default());
                self.state.effects.push(format!("{call} on {}", self.state.page));
                ExecutionResult::applied()
            }
            skills::SWIPE_SELECTOR => {
                let idx = target.expect("swipe_selector has rid");
                let values = &self.widgets()[idx].selector_values;
                if values.is_empty() {
                    return ExecutionResult::rejected("no effect");
                }
                let cur = values.iter().position(|v| v == self.text_of(idx)).unwrap_or(0);
                let next = match call.arg("direction") {
                    Some("up") | Some("left") => cur.checked_sub(1),
                    _ => Some(cur + 1).filter(|n| *n < values.len()),
                };
                match next {
                    Some(n) => {
                        let v = values[n].clone();
                        self.set_text(idx, v, call);
                        ExecutionResult::applied()
                    }
                    None => ExecutionResult::rejected("selector is already at its last value"),
                }
            }
            skills::PRESS_ADB_BACK_KEY => match self.state.history.pop() {
                Some(prev) => {
                    let from = std::mem::replace(&mut self.state.page, prev);
                    self.state
                        .effects
                        .push(format!("back from {from} to {}", self.state.page));
                    ExecutionResult::applied()
                }
                None => ExecutionResult::rejected("no previous page"),
            },
            _ => ExecutionResult::rejected("no effect"),
        }
    }
}

impl DeviceBackend for Simulator {
    fn capabilities(&self) -> Capabilities {
        Capabilities { has_screenshot: true }
    }

    fn observe(&mut self) -> Result<Observation, DeviceError> {
        Ok(Observation {
            xml: self.render_xml(),
            screenshot: self.render_screenshot(),
        })
    }

    fn execute(&mut self, call: &SkillCall, state: &GuiState) -> Result<ExecutionResult, DeviceError> {
        Ok(self.run(call, state))
    }

    fn reset(&mut self) -> Result<(), DeviceError> {
        self.state = SimState::fresh(&self.scenario.initial_page);
        Ok(())
    }

    fn current_page(&self) -> Option<String> {
        Some(self.state.page.clone())
    }

    fn is_terminal(&self) -> Option<bool> {
        Some(self.scenario.terminal_pages.contains(&self.state.page))
    }
}
