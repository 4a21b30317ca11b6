#pragma once
// { not a scope
struct Vec { float x, y, z; };
