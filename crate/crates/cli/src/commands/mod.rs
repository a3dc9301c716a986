pub mod calibrate;
pub mod evaluate;
pub mod forecast;
pub mod generate;
pub mod train;
