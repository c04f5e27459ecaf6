// Browser entry point; tests import init() directly instead.

import { Api } from "./api.js";
import { init } from "./app.js";

init(document, new Api(""));
