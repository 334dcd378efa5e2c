//! Neural learners for the cross-validation driver.

use rfaffect_core::eval::Pipeline;
use rfaffect_core::features;
use rfaffect_core::pipeline::Standardizer;
use rfaffect_core::{seed, Matrix};

use crate::model::{build_ecg_model_with, build_rf_model_with, Model, RfModelConfig};
use crate::tensor::Tensor;
use crate::train::{train, NetSample, TrainConfig};
use crate::NnError;

/// Y-shaped RF network trained from scratch in every fold. Inputs are
/// per-record transforms, so they can be computed once up front.
pub struct RfNetPipeline<'a> {
    pub samples: &'a [NetSample],
    pub model: RfModelConfig,
    pub train: TrainConfig,
}

impl RfNetPipeline<'_> {
    fn fold_model(&self, seed: u64) -> Result<Model, NnError> {
        let first = &self.samples[0].inputs;
        let (len, ch) = (first[0].shape[0], first[0].shape[1]);
        let hw = (first[1].shape[1], first[1].shape[2]);
        let mut m = build_rf_model_with(len, ch, hw, 4, &self.model)?;
        m.initialize(seed::derive_named(seed, "init"));
        Ok(m)
    }

    /// Trains on `train` and returns the model with its loss trace.
    pub fn fit(&self, train_idx: &[usize], seed: u64) -> Result<(Model, Vec<f64>), NnError> {
        let mut model = self.fold_model(seed)?;
        let data: Vec<NetSample> = train_idx.iter().map(|&i| self.samples[i].clone()).collect();
        let cfg = TrainConfig {
            seed: seed::derive_named(seed, "shuffle"),
            ..self.train.clone()
        };
        let trace = train(&mut model, &data, &cfg)?;
        Ok((model, trace))
    }
}

impl Pipeline for RfNetPipeline<'_> {
    fn name(&self) -> String {
        "rf_net".into()
    }

    fn fit_predict(&self, train_idx: &[usize], test: &[usize], seed: u64) -> Result<Vec<Vec<f64>>, String> {
        let (model, _) = self.fit(train_idx, seed).map_err(|e| e.to_string())?;
        test.iter()
            .map(|&i| model.forward(&self.samples[i].inputs).map_err(|e| e.to_string()))
            .collect()
    }
}

/// ECG network: scaleogram plus IBI features. Each fold standardizes the
/// features on its training rows and keeps the mRmR top `n_features`.
pub struct EcgNetPipeline<'a> {
    pub images: &'a [Tensor],
    pub features: &'a Matrix,
    pub labels: &'a [usize],
    pub n_features: usize,
    pub filters: [usize; 2],
    pub train: TrainConfig,
}

impl EcgNetPipeline<'_> {
    fn inputs(&self, scaler: &Standardizer, cols: &[usize], i: usize) -> Vec<Tensor> {
        let z = scaler.transform_row(self.features.row(i));
        let picked = cols.iter().map(|&c| z[c]).collect();
        vec![self.images[i].clone(), Tensor::vector(picked)]
    }
}

impl Pipeline for EcgNetPipeline<'_> {
    fn name(&self) -> String {
        "ecg_net".into()
    }

    fn fit_predict(&self, train_idx: &[usize], test: &[usize], seed: u64) -> Result<Vec<Vec<f64>>, String> {
        let scaler = Standardizer::fit(self.features, train_idx);
        let xtr = scaler.transform(self.features, train_idx);
        let ytr: Vec<usize> = train_idx.iter().map(|&i| self.labels[i]).collect();
        let k = self.n_features.min(self.features.cols());
        let cols = features::mrmr_select(&xtr, &ytr, k).map_err(|e| e.to_string())?;
        let hw = (self.images[0].shape[1], self.images[0].shape[2]);
        let mut model = build_ecg_model_with(hw, k, 4, self.filters).map_err(|e| e.to_string())?;
        model.initialize(seed::derive_named(seed, "init"));
        let data: Vec<NetSample> = train_idx
            .iter()
            .map(|&i| NetSample {
                inputs: self.inputs(&scaler, &cols, i),
                label: self.labels[i],
            })
            .collect();
        let cfg = TrainConfig {
            seed: seed::derive_named(seed, "shuffle"),
            ..self.train.clone()
        };
        train(&mut model, &data, &cfg).map_err(|e| e.to_string())?;
        test.iter()
            .map(|&i| {
                model
                    .forward(&self.inputs(&scaler, &cols, i))
                    .map_err(|e| e.to_string())
            })
            .collect()
    }
}
