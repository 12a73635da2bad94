import "./style.css";
import { SessionApi } from "./api";
import { createApp } from "./app";

// same-origin: the built bundle is served statically by the session service
createApp(document.getElementById("app")!, new SessionApi(""));
