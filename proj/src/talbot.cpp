namespace vfl {}
