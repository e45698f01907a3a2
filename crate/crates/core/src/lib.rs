pub mod coocnet;
pub mod corpus;
pub mod dtm;
pub mod export;
pub mod fixtures;
pub mod graph;
pub mod pipeline;
pub mod preprocess;
pub mod sentiment;
pub mod topicmodel;
pub mod topicnet;
